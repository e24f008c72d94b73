"""Seeded generation of random validated modules, and the counterexample search.

Random modules are built as tau-saturated quotients of free modules by
the submodule generated by random homogeneous elements: every sample is
a genuine B-module that is free over F2[tau] by construction, so there
is no rejection loop on the module axioms (validation stays on as a
safety net).  Everything is driven by one random.Random instance and
iterates sorted structures only, so a seed pins the corpus bit for bit.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import InternalError
from .modules import (
    ModOp,
    ModulePresentation,
    direct_sum,
    free_module,
    freeness_check,
    margolis,
    parse_module_file,
    reduce_mod_tau,
    saturated_quotient,
    suspend,
    trivial_module,
    validate,
)
from .profiles import Profile, a_profile

COUNTEREXAMPLE_A1 = """\
profile A(1)
gen u 0 0
gen a 1 0
gen v 2 0
gen c 3 0
gen b 3 1
gen d 4 1
gen e 5 1
gen f 6 1
Sq[1] u = a
Sq[1] v = c
Sq[1] b = d
Sq[1] e = f
Sq[2] u = t^1 v
Sq[2] a = b
Sq[2] v = d
Sq[2] c = e
Sq[2] d = t^1 f
"""


CORRUPTED_A1 = COUNTEREXAMPLE_A1.replace("Sq[2] v = d\n", "")


def counterexample_module() -> ModulePresentation:
    return parse_module_file(COUNTEREXAMPLE_A1)


def corrupted_module() -> ModulePresentation:
    """Negative control: the counterexample with one action line deleted,
    which breaks Sq^2 Sq^2 = tau Sq^3 Sq^1 on the bottom generator."""
    return parse_module_file(CORRUPTED_A1)


def tau_twisted_q0_module(profile: Profile | None = None) -> ModulePresentation:
    """Two generators with Sq^1 g = tau g'; Margolis homology is nonzero
    both mod tau and over M2 (as a tau-torsion class)."""
    profile = profile or a_profile(1)
    gens = [("g", 0, 0), ("gp", 1, -1)]
    actions = {1: ModOp(1, 0, (0, 1))}
    return ModulePresentation(profile, gens, actions)


def random_element(m: ModulePresentation, rng: random.Random,
                   topdeg: int, weight: int) -> tuple[int, int, int]:
    """A random homogeneous element (topdeg, weight, bitvec), possibly zero."""
    vec = 0
    for i in m.gens_at(topdeg):
        if m.gens[i].weight <= weight and rng.random() < 0.5:
            vec |= 1 << i
    return (topdeg, weight, vec)


def _random_quotient(profile: Profile, rng: random.Random,
                     dim_cap: int) -> ModulePresentation | None:
    nblocks = rng.choice([1, 1, 1, 2])
    blocks = []
    for b in range(nblocks):
        dt = rng.randrange(0, 4)
        dw = rng.randrange(max(-1, dt // 2 - 1), dt // 2 + 2)
        blocks.append((f"x{b}", dt, dw))
    F = free_module(profile, blocks)
    tops = sorted({g.topdeg for g in F.gens})
    rels = []
    for _ in range(rng.randrange(1, 4)):
        t = rng.choice(tops[len(tops) // 3:])
        ws = sorted({g.weight for g in F.gens if g.topdeg == t})
        w = rng.choice(ws) + rng.randrange(0, 2)
        rels.append(random_element(F, rng, t, w))
    M = saturated_quotient(F, rels)
    if not (0 < len(M.gens) <= dim_cap):
        return None
    return M


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    module: ModulePresentation


def generate_corpus(profile: Profile, seed: int, count: int,
                    dim_cap: int = 48) -> list[CorpusEntry]:
    """A reproducible mix of free, trivial, quotient and fixture modules."""
    rng = random.Random(seed)
    out: list[CorpusEntry] = []

    def add(name, m):
        bad = validate(m)
        if bad:
            raise InternalError(f"corpus module {name} failed validation: {bad[0]}")
        out.append(CorpusEntry(name=name, module=m))

    add("self", free_module(profile, [("x", 0, 0)]))
    add("trivial", trivial_module(profile))
    add("trivial.shift", trivial_module(profile, topdeg=2, weight=1))
    if profile == a_profile(1):
        add("counterexample", counterexample_module())
        add("tau_twisted_q0", tau_twisted_q0_module(profile))
    add("free.pair", free_module(profile, [("x", 0, 0), ("y", 1, 0)]))
    add("sum.trivials", direct_sum(trivial_module(profile),
                                   suspend(trivial_module(profile), 1, 0)))

    attempts = 0
    while len(out) < count and attempts < count * 30:
        attempts += 1
        kind = rng.random()
        if kind < 0.18:
            dt = rng.randrange(0, 3)
            m = suspend(free_module(profile, [("x", 0, 0)]), dt, dt // 2)
            add(f"free.{len(out)}", m)
        else:
            m = _random_quotient(profile, rng, dim_cap)
            if m is None:
                continue
            add(f"quot.{len(out)}", m)
    if len(out) < count:
        raise InternalError("corpus generation starved; widen the parameters")
    return out[:count]


# --- counterexample search ---------------------------------------------------


def _twisted_diagram_candidates():
    """Diagrams on the A(1) bidegree pattern with the second branch shifted
    down one weight; yields (gens, sq1 positions, sq2 positions) with every
    admissible incidence listed for enumeration."""
    gens = [("u", 0, 0), ("a", 1, 0), ("v", 2, 0), ("c", 3, 0),
            ("b", 3, 1), ("d", 4, 1), ("e", 5, 1), ("f", 6, 1)]
    names = [g[0] for g in gens]

    def allowed(k):
        pos = []
        for j, (nj, tj, wj) in enumerate(gens):
            for i, (ni, ti, wi) in enumerate(gens):
                if ti == tj + k and wj + k // 2 - wi >= 0:
                    pos.append((i, j))
        return pos

    return gens, names, allowed(1), allowed(2)


def search_counterexamples(limit: int = 1, log=None) -> list[ModulePresentation]:
    """Enumerate weight-twisted A(1)-pattern diagrams for modules with
    vanishing Q_0 and Q_1 Margolis homology but nonvanishing P_1^1.

    Deterministic order; with limit=1 this returns the shipped fixture's
    module (up to generator naming) as its first hit.
    """
    profile = a_profile(1)
    gens, names, pos1, pos2 = _twisted_diagram_candidates()
    found: list[ModulePresentation] = []
    n = len(gens)
    for mask2 in range(1 << len(pos2)):
        bits2 = [0] * n
        for p, (i, j) in enumerate(pos2):
            if (mask2 >> p) & 1:
                bits2[i] |= 1 << j
        for mask1 in range(1 << len(pos1)):
            bits1 = [0] * n
            for p, (i, j) in enumerate(pos1):
                if (mask1 >> p) & 1:
                    bits1[i] |= 1 << j
            actions = {1: ModOp(1, 0, tuple(bits1)), 2: ModOp(2, 1, tuple(bits2))}
            try:
                m = ModulePresentation(profile, gens, actions)
            except Exception:
                continue
            # cheap necessary check before the full table: Sq1 Sq1 = 0
            sq1 = actions[1]
            if not sq1.compose(sq1).is_zero():
                continue
            if validate(m):
                continue
            nred = reduce_mod_tau(m)
            if margolis(nred, ("Q", 0)).total:
                continue
            if margolis(nred, ("Q", 1)).total:
                continue
            if not margolis(nred, ("P", 1, 1)).total:
                continue
            verdict = freeness_check(m)
            if verdict.free or verdict.witness != ("P", 1, 1):
                continue
            found.append(m)
            if log:
                log(f"counterexample #{len(found)}: sq1={mask1:x} sq2={mask2:x}")
            if len(found) >= limit:
                return found
    return found
