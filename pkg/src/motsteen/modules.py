"""Finite-type module presentations over finite Hopf subalgebras B(h,k).

A module is presented by generators with bidegrees and by the action of
the algebra generators Sq^(2^i) that lie in B; the action of every other
basis element is derived from expressions of the Milnor basis in words
on those generators, found once per profile by linear algebra inside B.
Validating a presentation checks the whole multiplication table of B
against the derived actions, which is equivalent to checking all Adem
relations but stays inside B (admissible words can leave a subalgebra:
the top class of A(1) leads with Sq^5 Sq^1).

Operators are stored as incidence bit matrices; as everywhere else the
tau exponent of an entry is forced by the weights, so composition and
addition are plain bit operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from . import milnor
from .errors import DomainError, InternalError, ParseError, StructureError
from .grlinalg import (
    F2Matrix,
    GradedTauMatrix,
    M2Homology,
    m2_homology,
    rank_nullspace,
    tau_smith,
)
from .milnor import AlgebraElement, MilnorElt, product, product_mod_tau, sq
from .profiles import (
    Profile,
    TauProfile,
    a_profile,
    contains_p,
    contains_q,
    enumerate_basis,
    mod_tau_profile,
    parse_profile,
    profile_name,
)

OpSpec = tuple  # ("Q", i) or ("P", s, t)


def op_element(op: OpSpec) -> AlgebraElement:
    if op[0] == "Q":
        return milnor.q_element(op[1])
    if op[0] == "P":
        return milnor.p_element(op[1], op[2])
    raise DomainError(f"unknown operation spec {op!r}")


def op_label(op: OpSpec) -> str:
    if op[0] == "Q":
        return f"Q_{op[1]}"
    return f"P^{op[1]}_{op[2]}"


# --- algebra data per profile ----------------------------------------------


class AlgebraData:
    """Basis, products and generator-word expressions for a finite B(h,k).

    With mod_tau=True everything is computed in B/tau = D(h,l); the
    basis is the same monomial list, products drop positive tau powers,
    and expressions carry no tau shifts.
    """

    def __init__(self, profile: Profile, mod_tau: bool = False):
        if not profile.is_finite():
            raise DomainError("module machinery requires a finite profile")
        self.profile = profile
        self.mod_tau = mod_tau
        self.basis: list[MilnorElt] = enumerate_basis(profile)
        self.index = {b: i for i, b in enumerate(self.basis)}
        self.bidegrees = [b.bidegree() for b in self.basis]
        self.top = max((t for t, _ in self.bidegrees), default=0)
        self.gen_exponents = self._generator_exponents()
        self._products: dict[tuple[int, int], AlgebraElement] = {}
        self.expressions = self._build_expressions()

    def _generator_exponents(self) -> list[int]:
        gens = []
        if contains_q(self.profile, 0):
            gens.append(1)
        i = 1
        while contains_p(self.profile, i, 1):
            gens.append(2 ** i)
            i += 1
        return gens

    def _mult(self, x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
        return product_mod_tau(x, y) if self.mod_tau else product(x, y)

    def elt(self, i: int) -> AlgebraElement:
        return milnor.from_milnor(self.basis[i])

    def prod(self, i: int, j: int) -> AlgebraElement:
        key = (i, j)
        if key not in self._products:
            self._products[key] = self._mult(self.elt(i), self.elt(j))
        return self._products[key]

    def dims(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for bd in self.bidegrees:
            out[bd] = out.get(bd, 0) + 1
        return out

    def _vec(self, x: AlgebraElement, at_deg: int) -> int:
        bits = 0
        for term in x.terms:
            bits |= 1 << self.index[term]
        return bits

    def _build_expressions(self):
        """For each basis element, a list of (tau_exp, word of generator
        exponents) whose tau-shifted word products sum to it."""
        exprs: dict[int, list[tuple[int, tuple[int, ...]]]] = {}
        unit_idx = self.index[MilnorElt()]
        exprs[unit_idx] = [(0, ())]
        for k in self.gen_exponents:
            term = next(iter(sq(k).terms))
            if term in self.index:
                exprs[self.index[term]] = [(0, (k,))]

        # kept[d]: spanning list of (word, value) at topological degree d
        kept: dict[int, list[tuple[tuple[int, ...], AlgebraElement]]] = {0: [((), milnor.unit())]}
        by_deg: dict[int, list[int]] = {}
        for i, (t, _) in enumerate(self.bidegrees):
            by_deg.setdefault(t, []).append(i)

        for d in range(1, self.top + 1):
            candidates = []
            for k in self.gen_exponents:
                for word, value in kept.get(d - k, []):
                    candidates.append((word + (k,), self._mult(value, sq(k))))
            chosen: list[tuple[tuple[int, ...], AlgebraElement]] = []

            def shiftable(uw, vw):
                return uw == vw if self.mod_tau else uw <= vw

            def in_span(vec, w):
                cols = [self._vec(val, d) for _, val in chosen
                        if shiftable(val.weight, w)]
                from .grlinalg import solve_f2
                return solve_f2(cols, vec) is not None

            for word, value in candidates:
                if value.is_zero():
                    continue
                if not in_span(self._vec(value, d), value.weight):
                    chosen.append((word, value))
            kept[d] = chosen

            for i in sorted(by_deg.get(d, []), key=lambda i: self.bidegrees[i][1]):
                if i in exprs:
                    continue
                w = self.bidegrees[i][1]
                usable = [(word, val) for word, val in chosen if shiftable(val.weight, w)]
                from .grlinalg import solve_f2
                combo = solve_f2([self._vec(val, d) for _, val in usable],
                                 1 << i)
                if combo is None:
                    raise StructureError(
                        f"B({profile_name(self.profile)}) is not generated by its "
                        f"Sq-power elements; cannot express {self.basis[i]}")
                expr = []
                for pos in range(len(usable)):
                    if (combo >> pos) & 1:
                        word, val = usable[pos]
                        expr.append((w - val.weight, word))
                exprs[i] = expr
        return exprs

    def op_index(self, op: OpSpec) -> int:
        term = next(iter(op_element(op).terms))
        if term not in self.index:
            raise DomainError(f"{op_label(op)} does not lie in B({profile_name(self.profile)})")
        return self.index[term]

    def ops_for_freeness(self) -> list[OpSpec]:
        """All Q_t and P_t^s (s <= t) in B, by increasing topological degree."""
        ops = []
        for j in range(len(self.profile.k) + 1):
            if contains_q(self.profile, j):
                ops.append(("Q", j))
        for t in range(1, len(self.profile.h) + 1):
            for s in range(1, min(t, int(self.profile.hv(t))) + 1):
                ops.append(("P", s, t))
        ops.sort(key=lambda op: (op_element(op).topdeg, op))
        return ops


@lru_cache(maxsize=64)
def algebra_data(profile: Profile, mod_tau: bool = False) -> AlgebraData:
    return AlgebraData(profile, mod_tau)


# --- operators on a presented module ---------------------------------------


@dataclass(frozen=True)
class ModOp:
    """An M2-linear operator raising bidegree by (dt, dw); incidence bits.

    Entry (i, j) sends generator j to tau^(w_j + dw - w_i) g_i; both the
    topdeg match t_i = t_j + dt and the exponent nonnegativity are
    enforced against the owning module's generator list.
    """

    dt: int
    dw: int
    bits: tuple[int, ...]

    def compose(self, other: "ModOp") -> "ModOp":
        out = []
        for r in self.bits:
            acc = 0
            rr = r
            while rr:
                k = (rr & -rr).bit_length() - 1
                acc ^= other.bits[k]
                rr &= rr - 1
            out.append(acc)
        return ModOp(self.dt + other.dt, self.dw + other.dw, tuple(out))

    def add(self, other: "ModOp") -> "ModOp":
        if (self.dt, self.dw) != (other.dt, other.dw):
            raise StructureError("operator bidegree mismatch")
        return ModOp(self.dt, self.dw, tuple(a ^ b for a, b in zip(self.bits, other.bits)))

    def is_zero(self) -> bool:
        return all(b == 0 for b in self.bits)


@dataclass(frozen=True)
class Generator:
    name: str
    topdeg: int
    weight: int

    @property
    def bidegree(self):
        return (self.topdeg, self.weight)


class ModulePresentation:
    """A finite-type M2-free module over B(h,k), given by generator actions."""

    def __init__(self, profile: Profile, gens, actions: dict[int, ModOp],
                 connectivity: int | None = None):
        self.profile = profile
        self.gens: tuple[Generator, ...] = tuple(
            g if isinstance(g, Generator) else Generator(*g) for g in gens)
        names = [g.name for g in self.gens]
        if len(set(names)) != len(names):
            raise StructureError("duplicate generator names")
        self.data = algebra_data(profile)
        self.actions: dict[int, ModOp] = {}
        for k in self.data.gen_exponents:
            op = actions.get(k)
            if op is None:
                op = ModOp(k, k // 2, (0,) * len(self.gens))
            self._check_shape(k, op)
            self.actions[k] = op
        extra = set(actions) - set(self.data.gen_exponents)
        if extra:
            raise StructureError(f"actions given for Sq powers outside B: {sorted(extra)}")
        self.connectivity = connectivity if connectivity is not None else (
            min((g.topdeg for g in self.gens), default=0))
        self._act_cache: dict[int, ModOp] = {}

    def _check_shape(self, k: int, op: ModOp) -> None:
        if (op.dt, op.dw) != (k, k // 2):
            raise StructureError(f"Sq[{k}] action has bidegree {(op.dt, op.dw)}")
        if len(op.bits) != len(self.gens):
            raise StructureError(f"Sq[{k}] action has wrong size")
        for i, row in enumerate(op.bits):
            rr = row
            while rr:
                j = (rr & -rr).bit_length() - 1
                gi, gj = self.gens[i], self.gens[j]
                if gi.topdeg != gj.topdeg + k:
                    raise StructureError(
                        f"Sq[{k}] sends {gj.name} (topdeg {gj.topdeg}) to "
                        f"{gi.name} (topdeg {gi.topdeg})")
                if gj.weight + k // 2 - gi.weight < 0:
                    raise StructureError(
                        f"Sq[{k}] entry {gj.name} -> {gi.name} needs a negative tau power")
                rr &= rr - 1

    # -- structure ----------------------------------------------------------

    @property
    def span(self) -> int:
        if not self.gens:
            return 0
        tops = [g.topdeg for g in self.gens]
        return max(tops) - min(tops)

    def dims(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for g in self.gens:
            out[g.bidegree] = out.get(g.bidegree, 0) + 1
        return out

    def gens_at(self, topdeg: int) -> list[int]:
        return [i for i, g in enumerate(self.gens) if g.topdeg == topdeg]

    def zero_op(self, dt: int, dw: int) -> ModOp:
        return ModOp(dt, dw, (0,) * len(self.gens))

    def identity_op(self) -> ModOp:
        return ModOp(0, 0, tuple(1 << i for i in range(len(self.gens))))

    def act(self, basis_idx: int) -> ModOp:
        """Derived action of a Milnor basis element of B."""
        if basis_idx in self._act_cache:
            return self._act_cache[basis_idx]
        t, w = self.data.bidegrees[basis_idx]
        acc = self.zero_op(t, w)
        for _tau, word in self.data.expressions[basis_idx]:
            m = self.identity_op()
            for k in reversed(word):
                m = self._word_step(k, m)
            # tau shift changes no bits, only the declared bidegree bookkeeping
            acc = acc.add(ModOp(t, w, m.bits))
        self._act_cache[basis_idx] = acc
        return acc

    def _word_step(self, k: int, m: ModOp) -> ModOp:
        return self.actions[k].compose(m)

    def act_element(self, x: AlgebraElement) -> ModOp:
        acc = self.zero_op(x.topdeg, x.weight)
        for term in x.terms:
            idx = self.data.index.get(term)
            if idx is None:
                raise DomainError(f"{term} is not in B({profile_name(self.profile)})")
            acc = acc.add(ModOp(x.topdeg, x.weight, self.act(idx).bits))
        return acc

    def op_action(self, op: OpSpec) -> ModOp:
        return self.act(self.data.op_index(op))

    # -- vectors ------------------------------------------------------------

    def apply(self, op: ModOp, topdeg: int, bitvec: int) -> tuple[int, int]:
        """Apply an operator to a vector supported on gens_at(topdeg)."""
        out = 0
        for i in self.gens_at(topdeg + op.dt):
            row = op.bits[i]
            if bin(row & bitvec).count("1") & 1:
                out |= 1 << i
        return topdeg + op.dt, out

    def slice_matrix(self, op: ModOp, topdeg: int, shift: str = "cols") -> GradedTauMatrix:
        """The graded matrix of op from topdeg to topdeg + dt.

        The weight raise dw has to live somewhere: with shift="cols" the
        domain weights carry it (col = w + dw), with shift="rows" the
        codomain ones do (row = w - dw).  Entry exponents agree; the
        choice only matters when chaining slices into a complex.
        """
        src = self.gens_at(topdeg)
        dst = self.gens_at(topdeg + op.dt)
        rows = []
        for i in dst:
            bits = 0
            for out_j, j in enumerate(src):
                if (op.bits[i] >> j) & 1:
                    bits |= 1 << out_j
            rows.append(bits)
        if shift == "cols":
            rw = tuple(self.gens[i].weight for i in dst)
            cw = tuple(self.gens[j].weight + op.dw for j in src)
        else:
            rw = tuple(self.gens[i].weight - op.dw for i in dst)
            cw = tuple(self.gens[j].weight for j in src)
        return GradedTauMatrix(row_weights=rw, col_weights=cw, rows=tuple(rows))


@dataclass(frozen=True)
class Violation:
    left: str
    right: str
    bidegree: tuple[int, int]
    detail: str

    def __str__(self):
        return f"{self.left} o {self.right} mismatch in bidegree {self.bidegree}: {self.detail}"


def validate(m: ModulePresentation) -> list[Violation]:
    """Check the module axioms: the derived action is multiplicative.

    It suffices to test Sq[k] . act(b) == act(Sq[k] * b) for every
    algebra generator Sq[k] of B and every Milnor basis element b with
    k + |b| inside the module's degree span; multiplicativity on all
    pairs follows by induction along the generator words.
    """
    data = m.data
    out: list[Violation] = []
    for k in data.gen_exponents:
        sk = sq(k)
        for idx, b in enumerate(data.basis):
            if k + b.topdeg > m.span:
                continue
            lhs = m.actions[k].compose(m.act(idx))
            prod_elt = product(sk, milnor.from_milnor(b))
            rhs = m.act_element(prod_elt)
            if lhs.bits != rhs.bits:
                diff = [i for i, (a, c) in enumerate(zip(lhs.bits, rhs.bits)) if a != c]
                gnames = ", ".join(m.gens[i].name for i in diff[:4])
                out.append(Violation(
                    left=f"Sq[{k}]", right=str(b),
                    bidegree=(k + b.topdeg, k // 2 + b.weight),
                    detail=f"differs in rows of {gnames}"))
                if len(out) >= 8:
                    return out
    return out


# --- mod tau reduction and Margolis homology --------------------------------


class F2Module:
    """The reduction M/tau: same generators, only weight-exact entries."""

    def __init__(self, profile: Profile, gens, actions: dict[int, ModOp],
                 tau_profile: TauProfile | None = None):
        self.profile = profile
        self.tau_profile = tau_profile or mod_tau_profile(profile)
        self.gens: tuple[Generator, ...] = tuple(gens)
        self.data = algebra_data(profile, mod_tau=True)
        self.actions = actions
        self._act_cache: dict[int, ModOp] = {}

    @property
    def dim(self) -> int:
        return len(self.gens)

    def dims(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for g in self.gens:
            out[g.bidegree] = out.get(g.bidegree, 0) + 1
        return out

    def gens_at(self, topdeg: int) -> list[int]:
        return [i for i, g in enumerate(self.gens) if g.topdeg == topdeg]

    def gens_at_bidegree(self, t: int, w: int) -> list[int]:
        return [i for i, g in enumerate(self.gens) if g.bidegree == (t, w)]

    @property
    def span(self) -> int:
        if not self.gens:
            return 0
        tops = [g.topdeg for g in self.gens]
        return max(tops) - min(tops)

    def zero_op(self, dt, dw) -> ModOp:
        return ModOp(dt, dw, (0,) * len(self.gens))

    def identity_op(self) -> ModOp:
        return ModOp(0, 0, tuple(1 << i for i in range(len(self.gens))))

    def act(self, basis_idx: int) -> ModOp:
        if basis_idx in self._act_cache:
            return self._act_cache[basis_idx]
        t, w = self.data.bidegrees[basis_idx]
        acc = self.zero_op(t, w)
        for _tau, word in self.data.expressions[basis_idx]:
            m = self.identity_op()
            for k in reversed(word):
                m = self.actions[k].compose(m)
            acc = acc.add(ModOp(t, w, m.bits))
        self._act_cache[basis_idx] = acc
        return acc

    def op_action(self, op: OpSpec) -> ModOp:
        return self.act(self.data.op_index(op))

    def slice_f2(self, op: ModOp, t: int, w: int) -> tuple[F2Matrix, list[int], list[int]]:
        src = self.gens_at_bidegree(t, w)
        dst = self.gens_at_bidegree(t + op.dt, w + op.dw)
        rows = []
        for i in dst:
            bits = 0
            for out_j, j in enumerate(src):
                if (op.bits[i] >> j) & 1:
                    bits |= 1 << out_j
            rows.append(bits)
        return F2Matrix(len(dst), len(src), tuple(rows)), dst, src


def _restrict_mod_tau(m: ModulePresentation, op: ModOp) -> ModOp:
    rows = []
    for i, row in enumerate(op.bits):
        bits = 0
        rr = row
        while rr:
            j = (rr & -rr).bit_length() - 1
            if m.gens[j].weight + op.dw == m.gens[i].weight:
                bits |= 1 << j
            rr &= rr - 1
        rows.append(bits)
    return ModOp(op.dt, op.dw, tuple(rows))


def reduce_mod_tau(m: ModulePresentation) -> F2Module:
    actions = {k: _restrict_mod_tau(m, op) for k, op in m.actions.items()}
    return F2Module(m.profile, m.gens, actions)


@dataclass(frozen=True)
class MargolisReport:
    op: OpSpec
    label: str
    homology: dict  # (t, w) -> (dim ker, dim im, dim H)
    total: int

    def vanishes(self) -> bool:
        return self.total == 0


def margolis(n: F2Module, op: OpSpec) -> MargolisReport:
    """Margolis homology of the two-step complex op: n -> n -> n (mod tau)."""
    if op[0] == "Q":
        if not contains_q(n.profile, op[1]):
            raise DomainError(f"{op_label(op)} not in B({profile_name(n.profile)})")
    elif op[0] == "P":
        s, t = op[1], op[2]
        if not contains_p(n.profile, s, t):
            raise DomainError(f"{op_label(op)} not in B({profile_name(n.profile)})")
        if s > t:
            raise DomainError(f"{op_label(op)} has nonzero square in A/tau")
    act = n.op_action(op)
    if not act.compose(act).is_zero():
        raise InternalError(f"{op_label(op)} squares to a nonzero action mod tau")
    homology = {}
    total = 0
    for (t, w) in sorted(n.dims()):
        mid = n.gens_at_bidegree(t, w)
        if not mid:
            continue
        out_m, _, _ = n.slice_f2(act, t, w)
        in_m, _, _ = n.slice_f2(act, t - act.dt, w - act.dw)
        rank_out, _ = rank_nullspace(out_m)
        rank_in, _ = rank_nullspace(in_m)
        dim_ker = len(mid) - rank_out
        dim_h = dim_ker - rank_in
        if dim_h < 0:
            raise InternalError("margolis: image not contained in kernel")
        homology[(t, w)] = (dim_ker, rank_in, dim_h)
        total += dim_h
    return MargolisReport(op=op, label=op_label(op), homology=homology, total=total)


def margolis_over_M2(m: ModulePresentation, op: OpSpec) -> dict[int, M2Homology]:
    """Margolis homology over F2[tau], one M2-module shape per topdeg."""
    if op[0] == "Q":
        if not contains_q(m.profile, op[1]):
            raise DomainError(f"{op_label(op)} not in B({profile_name(m.profile)})")
    else:
        if not contains_p(m.profile, op[1], op[2]):
            raise DomainError(f"{op_label(op)} not in B({profile_name(m.profile)})")
    act = m.op_action(op)
    square = act.compose(act)
    if not square.is_zero():
        elt = op_element(op)
        sq_elt = product(elt, elt)
        if sq_elt.is_zero():
            raise InternalError(f"{op_label(op)}^2 = 0 in B but acts nonzero")
        raise DomainError(f"{op_label(op)}^2 does not act as zero on this module")
    out: dict[int, M2Homology] = {}
    for t in sorted({g.topdeg for g in m.gens}):
        incoming = m.slice_matrix(act, t - act.dt, shift="cols")
        outgoing = m.slice_matrix(act, t, shift="rows")
        out[t] = m2_homology(incoming, outgoing)
    return out


def margolis_m2_vanishes(report: dict[int, M2Homology]) -> bool:
    return all(h.is_zero() for h in report.values())


# --- freeness ----------------------------------------------------------------


@dataclass(frozen=True)
class FreenessVerdict:
    free: bool
    witness: OpSpec | None
    reports: tuple[MargolisReport, ...]

    def __str__(self):
        if self.free:
            return "Free"
        return f"NotFree (witness {op_label(self.witness)})"


def freeness_check(m: ModulePresentation) -> FreenessVerdict:
    """Theorem-B(i) decision: free iff all Margolis homologies of M/tau vanish.

    Operations of topological degree beyond the module's span act as
    zero, so their homology is all of M/tau; they are computed like any
    other and correctly flag any nonzero module as NotFree.
    """
    n = reduce_mod_tau(m)
    reports = []
    witness = None
    for op in m.data.ops_for_freeness():
        rep = margolis(n, op)
        reports.append(rep)
        if witness is None and not rep.vanishes():
            witness = op
    return FreenessVerdict(free=witness is None, witness=witness,
                           reports=tuple(reports))


def is_free_oracle(n: F2Module, p: Profile) -> bool:
    """Independent freeness test: the degreewise minimal free cover over
    D(h,l) is an isomorphism iff its kernel is zero iff dimensions match."""
    data = n.data
    # J*n, saturated under the generator actions
    span_vecs: dict[tuple[int, int], list[int]] = {}

    def add_vec(t, w, vec):
        if not vec:
            return False
        bucket = span_vecs.setdefault((t, w), [])
        v = vec
        for bv in bucket:
            low = bv & -bv
            if v & low:
                v ^= bv
        if v:
            bucket.append(v)
            bucket.sort(key=lambda x: x & -x)
            return True
        return False

    frontier: list[tuple[int, int, int]] = []
    for k in data.gen_exponents:
        act = n.actions[k]
        for j in range(n.dim):
            col = 0
            for i in range(n.dim):
                if (act.bits[i] >> j) & 1:
                    col |= 1 << i
            if col:
                t = n.gens[j].topdeg + act.dt
                w = n.gens[j].weight + act.dw
                if add_vec(t, w, col):
                    frontier.append((t, w, col))
    while frontier:
        t, w, vec = frontier.pop()
        for k in data.gen_exponents:
            act = n.actions[k]
            out = 0
            for i in range(n.dim):
                if bin(act.bits[i] & vec).count("1") & 1:
                    out |= 1 << i
            if out and add_vec(t + act.dt, w + act.dw, out):
                frontier.append((t + act.dt, w + act.dw, out))

    # minimal generators of n: basis of n/(J n) per bidegree
    cover_gens: list[tuple[int, int, int]] = []  # (t, w, bitvec)
    for (t, w) in sorted(n.dims()):
        idxs = n.gens_at_bidegree(t, w)
        basis = list(span_vecs.get((t, w), []))
        covered_rank = len(basis)
        for i in idxs:
            v = 1 << i
            for bv in basis:
                if v & (bv & -bv):
                    v ^= bv
            if v:
                basis.append(v)
                basis.sort(key=lambda x: x & -x)
                cover_gens.append((t, w, 1 << i))
    # dimension count: sum over cover generators of dim D shifted
    ddims = data.dims()
    expected: dict[tuple[int, int], int] = {}
    for (t, w, _) in cover_gens:
        for (bt, bw), dim in ddims.items():
            key = (t + bt, w + bw)
            expected[key] = expected.get(key, 0) + dim
    actual = n.dims()
    if expected != actual:
        return False
    # surjectivity per bidegree (graded Nakayama makes this automatic; verify)
    image: dict[tuple[int, int], list[int]] = {}
    for (t, w, vec) in cover_gens:
        for bidx in range(len(data.basis)):
            act = n.act(bidx)
            tv, out = t + act.dt, 0
            for i in range(n.dim):
                if bin(act.bits[i] & vec).count("1") & 1:
                    out |= 1 << i
            if out:
                bucket = image.setdefault((tv, w + act.dw), [])
                v = out
                for bv in bucket:
                    if v & (bv & -bv):
                        v ^= bv
                if v:
                    bucket.append(v)
                    bucket.sort(key=lambda x: x & -x)
    for bd, d in actual.items():
        if len(image.get(bd, [])) != d:
            return False
    return True


@dataclass(frozen=True)
class FreeBasisCertificate:
    generators: tuple[tuple[tuple[int, int], int, str], ...]  # (bidegree, bitvec, pretty)
    verified: bool

    @property
    def rank(self) -> int:
        return len(self.generators)


def lift_free_basis(m: ModulePresentation) -> FreeBasisCertificate:
    """Lift a D-basis of M/tau to a free B-basis of M and verify it.

    Only meaningful after freeness_check returned Free; a verification
    failure then contradicts the main freeness theorem and aborts.
    """
    n = reduce_mod_tau(m)
    data = m.data
    # minimal cover generators of n over D, as in the oracle
    oracle_gens: list[tuple[int, int, int]] = []
    span_vecs: dict[tuple[int, int], list[int]] = {}

    def reduce_v(bucket, v):
        for bv in bucket:
            if v & (bv & -bv):
                v ^= bv
        return v

    for k in data.gen_exponents:
        act = n.actions[k]
        for j in range(n.dim):
            col = 0
            for i in range(n.dim):
                if (act.bits[i] >> j) & 1:
                    col |= 1 << i
            if col:
                key = (n.gens[j].topdeg + act.dt, n.gens[j].weight + act.dw)
                bucket = span_vecs.setdefault(key, [])
                v = reduce_v(bucket, col)
                if v:
                    bucket.append(v)
                    bucket.sort(key=lambda x: x & -x)
    changed = True
    while changed:
        changed = False
        for (t, w), bucket in list(span_vecs.items()):
            for vec in list(bucket):
                for k in data.gen_exponents:
                    act = n.actions[k]
                    out = 0
                    for i in range(n.dim):
                        if bin(act.bits[i] & vec).count("1") & 1:
                            out |= 1 << i
                    if out:
                        key = (t + act.dt, w + act.dw)
                        b2 = span_vecs.setdefault(key, [])
                        v = reduce_v(b2, out)
                        if v:
                            b2.append(v)
                            b2.sort(key=lambda x: x & -x)
                            changed = True
    for (t, w) in sorted(n.dims()):
        bucket = list(span_vecs.get((t, w), []))
        for i in n.gens_at_bidegree(t, w):
            v = reduce_v(bucket, 1 << i)
            if v:
                bucket.append(v)
                bucket.sort(key=lambda x: x & -x)
                oracle_gens.append((t, w, 1 << i))

    # expected dimensions must tile exactly
    ddims = data.dims()
    expected: dict[tuple[int, int], int] = {}
    for (t, w, _) in oracle_gens:
        for (bt, bw), dim in ddims.items():
            key = (t + bt, w + bw)
            expected[key] = expected.get(key, 0) + dim
    if expected != m.dims():
        raise InternalError(
            "free-basis lift failed a dimension count after a Free verdict")

    # Phi: free module on the lifted generators -> M, checked per topdeg
    for t in sorted({g.topdeg for g in m.gens}):
        cols = []
        col_weights = []
        for (tg, wg, vec) in oracle_gens:
            for bidx, (bt, bw) in enumerate(data.bidegrees):
                if tg + bt != t:
                    continue
                act = m.act(bidx)
                out = 0
                for i in range(len(m.gens)):
                    if bin(act.bits[i] & vec).count("1") & 1:
                        out |= 1 << i
                cols.append(out)
                col_weights.append(wg + bw)
        rows_idx = m.gens_at(t)
        rows = []
        for i in rows_idx:
            bits = 0
            for cpos, col in enumerate(cols):
                if (col >> i) & 1:
                    bits |= 1 << cpos
            rows.append(bits)
        mat = GradedTauMatrix(
            row_weights=tuple(m.gens[i].weight for i in rows_idx),
            col_weights=tuple(col_weights),
            rows=tuple(rows),
        )
        if mat.nrows != mat.ncols:
            raise InternalError("free-basis lift: non-square comparison matrix")
        res = tau_smith(mat)
        if not res.shape.is_zero() or res.kernel.ncols != 0:
            raise InternalError(
                f"free-basis lift is not an isomorphism in topdeg {t} "
                f"(coker {res.shape}, kernel rank {res.kernel.ncols})")

    def pretty(t, w, vec):
        names = [m.gens[i].name for i in range(len(m.gens)) if (vec >> i) & 1]
        return " + ".join(names)

    gens = tuple(((t, w), vec, pretty(t, w, vec)) for (t, w, vec) in oracle_gens)
    return FreeBasisCertificate(generators=gens, verified=True)


# --- constructions -----------------------------------------------------------


def free_module(profile: Profile, blocks: list[tuple[str, int, int]]) -> ModulePresentation:
    """The free module on the given (name, topdeg, weight) block generators."""
    data = algebra_data(profile)
    gens = []
    index = {}
    for bname, bt, bw in blocks:
        for bidx, b in enumerate(data.basis):
            t, w = data.bidegrees[bidx]
            name = f"{bname}.{bidx}"
            index[(bname, bidx)] = len(gens)
            gens.append(Generator(name, bt + t, bw + w))
    actions = {}
    for k in data.gen_exponents:
        bits = [0] * len(gens)
        sk = sq(k)
        for bname, bt, bw in blocks:
            for bidx, b in enumerate(data.basis):
                col = index[(bname, bidx)]
                prod = product(sk, milnor.from_milnor(b))
                for term in prod.terms:
                    row = index[(bname, data.index[term])]
                    bits[row] |= 1 << col
        actions[k] = ModOp(k, k // 2, tuple(bits))
    return ModulePresentation(profile, gens, actions)


def trivial_module(profile: Profile, name: str = "g", topdeg: int = 0,
                   weight: int = 0) -> ModulePresentation:
    data = algebra_data(profile)
    actions = {k: ModOp(k, k // 2, (0,)) for k in data.gen_exponents}
    return ModulePresentation(profile, [Generator(name, topdeg, weight)], actions)


def suspend(m: ModulePresentation, dt: int, dw: int) -> ModulePresentation:
    gens = [Generator(g.name, g.topdeg + dt, g.weight + dw) for g in m.gens]
    return ModulePresentation(m.profile, gens, m.actions)


def direct_sum(a: ModulePresentation, b: ModulePresentation) -> ModulePresentation:
    if a.profile != b.profile:
        raise StructureError("direct sum over different profiles")
    gens = ([Generator(f"a.{g.name}", g.topdeg, g.weight) for g in a.gens]
            + [Generator(f"b.{g.name}", g.topdeg, g.weight) for g in b.gens])
    na = len(a.gens)
    actions = {}
    for k in a.data.gen_exponents:
        arows = list(a.actions[k].bits)
        brows = [r << na for r in b.actions[k].bits]
        actions[k] = ModOp(k, k // 2, tuple(arows + brows))
    return ModulePresentation(a.profile, gens, actions)


def saturated_quotient(m: ModulePresentation,
                       relations: list[tuple[int, int, int]],
                       name_prefix: str = "q") -> ModulePresentation:
    """Quotient of m by the tau-saturation of the B-submodule generated by
    the given homogeneous relation vectors (topdeg, weight, bitvec).

    Works one topological degree at a time: the B-span of the relations
    is collected as columns, tau_smith (with transforms) diagonalizes,
    pivot rows are removed (unit pivots are honest quotienting, torsion
    pivots are the saturation), and the actions are rewritten through
    the recorded basis change.
    """
    # B-span of the relation vectors
    cols_by_deg: dict[int, list[tuple[int, int]]] = {}  # t -> [(weight, bitvec)]
    for (t, w, vec) in relations:
        if vec == 0:
            continue
        for bidx in range(len(m.data.basis)):
            act = m.act(bidx)
            out = 0
            for i in range(len(m.gens)):
                if bin(act.bits[i] & vec).count("1") & 1:
                    out |= 1 << i
            if out:
                cols_by_deg.setdefault(t + act.dt, []).append((w + act.dw, out))

    topdegs = sorted({g.topdeg for g in m.gens})
    new_index: dict[int, int] = {}
    new_gens: list[Generator] = []
    trans: dict[int, tuple] = {}
    for t in topdegs:
        idxs = m.gens_at(t)
        pos = {i: p for p, i in enumerate(idxs)}
        cols = cols_by_deg.get(t, [])
        rows = [0] * len(idxs)
        for cpos, (w, vec) in enumerate(cols):
            vv = vec
            while vv:
                i = (vv & -vv).bit_length() - 1
                rows[pos[i]] |= 1 << cpos
                vv &= vv - 1
        mat = GradedTauMatrix(
            row_weights=tuple(m.gens[i].weight for i in idxs),
            col_weights=tuple(w for w, _ in cols),
            rows=tuple(rows),
        )
        res = tau_smith(mat, transforms=True)
        keep = list(res.free_rows)
        trans[t] = (idxs, keep, res.coord_map, res.new_basis)
        for p in keep:
            i = idxs[p]
            new_index[i] = len(new_gens)
            new_gens.append(Generator(f"{name_prefix}.{m.gens[i].name}",
                                      t, m.gens[i].weight))

    def new_vec(t, old_bitvec):
        """Rewrite an old-coordinate vector at topdeg t in the kept basis."""
        if t not in trans:
            if old_bitvec:
                raise InternalError("vector outside module degrees")
            return 0
        idxs, keep, coord_map, _ = trans[t]
        pos = {i: p for p, i in enumerate(idxs)}
        local = 0
        vv = old_bitvec
        while vv:
            i = (vv & -vv).bit_length() - 1
            local |= 1 << pos[i]
            vv &= vv - 1
        out = 0
        for p in keep:
            if bin(coord_map[p] & local).count("1") & 1:
                out |= 1 << new_index[idxs[p]]
        return out

    actions = {}
    for k, act in m.actions.items():
        bits = [0] * len(new_gens)
        for t in topdegs:
            idxs, keep, _, new_basis = trans[t]
            for p in keep:
                i = idxs[p]
                # image of the new basis vector under the action, old coords
                src = new_basis[p]
                out = 0
                for r in range(len(m.gens)):
                    col_mask = 0
                    vv = src
                    while vv:
                        q = (vv & -vv).bit_length() - 1
                        if (act.bits[r] >> idxs[q]) & 1:
                            col_mask ^= 1
                        vv &= vv - 1
                    if col_mask:
                        out |= 1 << r
                nv = new_vec(t + act.dt, out)
                vv = nv
                while vv:
                    r = (vv & -vv).bit_length() - 1
                    bits[r] |= 1 << new_index[i]
                    vv &= vv - 1
        actions[k] = ModOp(k, k // 2, tuple(bits))
    return ModulePresentation(m.profile, new_gens, actions)


# --- module files -------------------------------------------------------------


def parse_module_file(text: str) -> ModulePresentation:
    """Line-oriented module definition; see the README for the grammar."""
    profile = None
    gens: list[Generator] = []
    gen_index: dict[str, int] = {}
    action_rows: dict[int, dict[int, int]] = {}  # k -> {col: row bits...}
    pending: list[tuple[int, int, str, list[tuple[int, str]]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("profile"):
            if profile is not None:
                raise ParseError("duplicate profile line", lineno)
            try:
                profile = parse_profile(line[len("profile"):].strip())
            except ParseError as exc:
                raise ParseError(str(exc), lineno) from None
            continue
        if line.startswith("gen"):
            parts = line.split()
            if len(parts) != 4:
                raise ParseError("expected: gen NAME TOPDEG WEIGHT", lineno)
            _, name, t, w = parts
            try:
                g = Generator(name, int(t), int(w))
            except ValueError:
                raise ParseError("generator degrees must be integers", lineno) from None
            if name in gen_index:
                raise ParseError(f"duplicate generator {name}", lineno)
            gen_index[name] = len(gens)
            gens.append(g)
            continue
        if line.startswith("Sq["):
            close = line.find("]")
            if close < 0 or "=" not in line:
                raise ParseError("expected: Sq[K] NAME = TERMS", lineno)
            try:
                k = int(line[3:close])
            except ValueError:
                raise ParseError("bad Sq power", lineno) from None
            if k < 1 or (k & (k - 1)) != 0:
                raise ParseError(f"Sq[{k}]: only Sq powers of two generate B", lineno)
            lhs, rhs = line[close + 1:].split("=", 1)
            src_name = lhs.strip()
            terms = []
            rhs = rhs.strip()
            if rhs != "0":
                for chunk in rhs.split("+"):
                    chunk = chunk.strip()
                    e = 0
                    if chunk.startswith("t^"):
                        epart, _, rest = chunk.partition(" ")
                        try:
                            e = int(epart[2:])
                        except ValueError:
                            raise ParseError(f"bad tau power in {chunk!r}", lineno) from None
                        chunk = rest.strip()
                    if not chunk:
                        raise ParseError("missing generator name in action term", lineno)
                    terms.append((e, chunk))
            pending.append((lineno, k, src_name, terms))
            continue
        raise ParseError(f"unrecognized line {line!r}", lineno)

    if profile is None:
        raise ParseError("missing profile line")
    data = algebra_data(profile)
    nbits = len(gens)
    actions: dict[int, list[int]] = {k: [0] * nbits for k in data.gen_exponents}
    for lineno, k, src_name, terms in pending:
        if k not in actions:
            raise ParseError(f"Sq[{k}] is not in B{profile.describe()}", lineno)
        if src_name not in gen_index:
            raise ParseError(f"unknown generator {src_name}", lineno)
        j = gen_index[src_name]
        gj = gens[j]
        for e, tgt_name in terms:
            if tgt_name not in gen_index:
                raise ParseError(f"unknown generator {tgt_name}", lineno)
            i = gen_index[tgt_name]
            gi = gens[i]
            if gi.topdeg != gj.topdeg + k:
                raise ParseError(
                    f"Sq[{k}] {src_name} -> {tgt_name}: topdeg "
                    f"{gj.topdeg}+{k} != {gi.topdeg}", lineno)
            if gj.weight + k // 2 - gi.weight != e:
                raise ParseError(
                    f"Sq[{k}] {src_name} -> t^{e} {tgt_name}: weights force "
                    f"t^{gj.weight + k // 2 - gi.weight}", lineno)
            actions[k][i] ^= 1 << j
    ops = {k: ModOp(k, k // 2, tuple(bits)) for k, bits in actions.items()}
    return ModulePresentation(profile, gens, ops)


def write_module_file(m: ModulePresentation, header: str | None = None) -> str:
    lines = []
    if header:
        for h in header.splitlines():
            lines.append(f"# {h}")
    if m.profile == a_profile(0):
        lines.append("profile A(0)")
    elif m.profile == a_profile(1):
        lines.append("profile A(1)")
    elif m.profile == a_profile(2):
        lines.append("profile A(2)")
    else:
        lines.append(f"profile {m.profile.describe()}")
    order = sorted(range(len(m.gens)),
                   key=lambda i: (m.gens[i].topdeg, m.gens[i].weight, m.gens[i].name))
    for i in order:
        g = m.gens[i]
        lines.append(f"gen {g.name} {g.topdeg} {g.weight}")
    for k in sorted(m.actions):
        op = m.actions[k]
        for j in order:
            terms = []
            for i in order:
                if (op.bits[i] >> j) & 1:
                    e = m.gens[j].weight + k // 2 - m.gens[i].weight
                    terms.append((f"t^{e} " if e else "") + m.gens[i].name)
            if terms:
                lines.append(f"Sq[{k}] {m.gens[j].name} = " + " + ".join(terms))
    return "\n".join(lines) + "\n"
