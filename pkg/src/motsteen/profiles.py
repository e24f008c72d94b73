"""Profile functions and the finite Hopf subalgebras they classify.

A profile is the pair (h, k): h maps {1, 2, ...} and k maps {0, 1, ...}
into {0, 1, ..., inf}, both eventually constant.  The quotient
B(h, k) of the dual algebra kills xi_i^(2^h(i)) and tau_j^(2^k(j));
dually one gets a subalgebra of the Steenrod algebra spanned by the
Milnor operations rho(E, R) with e_i < 2^k(i) and r_j < 2^h(j).

Everything here is a pure function of the profile; condition scans are
restricted to a finite window (max support index + 2), beyond which the
constant tails decide every clause.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, StructureError
from .grlinalg import GradedTauMatrix, TauModuleShape, tau_smith
from .milnor import MilnorElt

INF = float("inf")


def _is_inf(v) -> bool:
    return isinstance(v, float) and math.isinf(v)


def _norm_tail(values, tail):
    values = list(values)
    while values and values[-1] == tail:
        values.pop()
    return tuple(values)


@dataclass(frozen=True)
class Profile:
    """The pair (h, k) with eventually constant tails.

    ``h`` is indexed from 1, ``k`` from 0.  A tail is any constant value
    (0, a positive integer, or INF); beyond the recorded window every
    condition clause is decided by the tails, so scans stay finite.
    """

    h: tuple = ()
    k: tuple = ()
    h_tail: object = 0
    k_tail: object = 0

    def __post_init__(self):
        for t in (self.h_tail, self.k_tail):
            if not _is_inf(t) and (not isinstance(t, int) or t < 0):
                raise StructureError("profile tails must be nonnegative or inf")
        if any(v < 0 for v in self.h) or any(v < 0 for v in self.k):
            raise StructureError("profile values must be >= 0")
        object.__setattr__(self, "h", _norm_tail(self.h, self.h_tail))
        object.__setattr__(self, "k", _norm_tail(self.k, self.k_tail))

    def hv(self, i: int):
        """h(i) for i >= 1."""
        if i < 1:
            raise DomainError("h is indexed from 1")
        return self.h[i - 1] if i - 1 < len(self.h) else self.h_tail

    def kv(self, j: int):
        """k(j) for j >= 0."""
        if j < 0:
            raise DomainError("k is indexed from 0")
        return self.k[j] if j < len(self.k) else self.k_tail

    @property
    def window(self) -> int:
        """Largest index that can matter in any condition scan."""
        return max(len(self.h), len(self.k), 1) + 2

    def is_finite(self) -> bool:
        return (self.h_tail == 0 and self.k_tail == 0
                and not any(_is_inf(v) for v in self.h)
                and not any(_is_inf(v) for v in self.k))

    def describe(self) -> str:
        def fmt(vals, tail):
            toks = ["inf" if _is_inf(v) else str(v) for v in vals]
            if tail != 0:
                toks.append(("inf" if _is_inf(tail) else str(tail)) + ",...")
            return "[" + ",".join(toks) + "]"
        return f"h={fmt(self.h, self.h_tail)} k={fmt(self.k, self.k_tail)}"


def a_profile(n: int) -> Profile:
    """The profile of A(n): h = (n, n-1, ..., 1), k = (n+1, n, ..., 1)."""
    if n < 0:
        raise DomainError("A(n) requires n >= 0")
    return Profile(h=tuple(range(n, 0, -1)), k=tuple(range(n + 1, 0, -1)))


def profile_name(p: Profile) -> str:
    """'A(n)' when the profile is one, otherwise the literal description."""
    if p.k and not _is_inf(p.k[0]):
        n = int(p.k[0]) - 1
        if n >= 0 and p == a_profile(n):
            return f"A({n})"
    return p.describe()


def full_profile() -> Profile:
    """The profile of the whole algebra: no relations at all."""
    return Profile(h=(), k=(), h_tail=INF, k_tail=INF)


def check_cond1(p: Profile) -> tuple[bool, tuple[int, int] | None]:
    """h(i) <= j + h(i+j) or h(j) <= h(i+j), for all i, j >= 1."""
    w = p.window
    for i in range(1, w + 1):
        for j in range(1, w + 1):
            if p.hv(i) <= j + p.hv(i + j):
                continue
            if p.hv(j) <= p.hv(i + j):
                continue
            return False, (i, j)
    return True, None


def check_cond2(p: Profile) -> tuple[bool, tuple[int, int] | None]:
    """h(i) <= j + k(i+j) or k(j) <= k(i+j), for all i >= 1, j >= 0."""
    w = p.window
    for i in range(1, w + 1):
        for j in range(0, w + 1):
            if p.hv(i) <= j + p.kv(i + j):
                continue
            if p.kv(j) <= p.kv(i + j):
                continue
            return False, (i, j)
    return True, None


def is_free_profile(p: Profile) -> bool:
    """h(i+1) <= k(i)-1 when k(i) != 0, and h(i+1) = 0 when k(i) = 0."""
    for i in range(0, p.window + 1):
        k = p.kv(i)
        bound = 0 if k == 0 else k - 1
        if p.hv(i + 1) > bound:
            return False
    return True


def minimize(p: Profile) -> Profile:
    """The minimal profile generating the same ideal.

    tau_i^(2^n) lies in I(h, k) iff n >= k(i), or n >= 1 and
    h(i+1) <= n - 1 (through tau_i^2 = tau xi_{i+1}); so the minimal
    k(i) is min(k(i), h(i+1) + 1).
    """
    w = p.window
    new_k = []
    for i in range(0, w + 1):
        hv = p.hv(i + 1)
        cap = INF if _is_inf(hv) else hv + 1
        new_k.append(min(p.kv(i), cap))
    tail_h = p.h_tail
    tail_k = min(p.k_tail, INF if _is_inf(tail_h) else tail_h + 1)
    return Profile(h=p.h, k=tuple(new_k), h_tail=tail_h, k_tail=tail_k)


def is_minimal(p: Profile) -> bool:
    return minimize(p) == p


def classical_correspondence(p: Profile) -> tuple:
    """The classical profile h_cl with k(i) = h_cl(i+1), h(i) = h_cl(i) - 1.

    Defined for free profiles satisfying both conditions; the input is
    minimized first, after which h_cl(i) = k(i-1) determines everything.
    Returns (values tuple, tail).
    """
    if not is_free_profile(p):
        raise DomainError("classical correspondence requires a free profile")
    ok1, _ = check_cond1(p)
    ok2, _ = check_cond2(p)
    if not (ok1 and ok2):
        raise DomainError("classical correspondence requires conditions 1 and 2")
    q = minimize(p)
    vals = tuple(q.kv(i - 1) for i in range(1, q.window + 2))
    return _norm_tail(vals, q.k_tail), q.k_tail


def inverse_classical(h_cl: tuple, tail=0) -> Profile:
    """The minimal free profile with k(i) = h_cl(i+1) and h(i) = max(h_cl(i)-1, 0)."""
    def hcl(i):
        return h_cl[i - 1] if i - 1 < len(h_cl) else tail
    w = len(h_cl) + 2
    h = tuple(max(hcl(i) - 1, 0) if not _is_inf(hcl(i)) else INF for i in range(1, w + 1))
    k = tuple(hcl(i + 1) for i in range(0, w + 1))
    h_tail = INF if _is_inf(tail) else 0
    k_tail = tail
    return Profile(h=h, k=k, h_tail=h_tail, k_tail=k_tail)


def check_classical_condition(h_cl: tuple, tail=0) -> bool:
    """h_cl(i) <= h_cl(i+j) + j or h_cl(j) <= h_cl(i+j) for all i, j >= 1."""
    def hcl(i):
        return h_cl[i - 1] if i - 1 < len(h_cl) else tail
    w = len(h_cl) + 2
    for i in range(1, w + 1):
        for j in range(1, w + 1):
            if hcl(i) <= hcl(i + j) + j or hcl(j) <= hcl(i + j):
                continue
            return False
    return True


def contains_q(p: Profile, i: int) -> bool:
    """Q_i lies in B(h,k) iff k(i) >= 1."""
    return p.kv(i) >= 1


def contains_p(p: Profile, s: int, t: int) -> bool:
    """P_t^s lies in B(h,k) iff 2^(s-1) < 2^h(t), i.e. s <= h(t)."""
    if s < 1 or t < 1:
        raise DomainError("P_t^s requires s, t >= 1")
    return s <= p.hv(t)


def contains_operation(p: Profile, op) -> bool:
    """Membership for an operation spec ('Q', i) or ('P', s, t)."""
    if op[0] == "Q":
        return contains_q(p, op[1])
    if op[0] == "P":
        return contains_p(p, op[1], op[2])
    raise DomainError(f"unknown operation spec {op!r}")


def enumerate_basis(p: Profile, topdeg_cap: int | None = None) -> list[MilnorElt]:
    """Monomial basis of B(h,k): e_i < 2^k(i), r_j < 2^h(j), topdeg <= cap.

    The cap is mandatory when any h or k value is infinite.  Output is
    sorted by (topdeg, weight, E, R).
    """
    if topdeg_cap is None and not p.is_finite():
        raise DomainError("infinite profile requires a topdeg cap")
    cap = topdeg_cap

    def tau_degree(i):  # |tau_i|
        return 2 ** (i + 1) - 1

    def xi_degree(j):  # |xi_j|
        return 2 ** (j + 1) - 2

    max_e = len(p.k)  # k(i) = 0 beyond, so e_i = 0 forced
    if cap is not None:
        while max_e > 0 and tau_degree(max_e - 1) > cap:
            max_e -= 1
        if p.k_tail >= 1:
            max_e = 0
            while tau_degree(max_e) <= cap:
                max_e += 1
    max_r = len(p.h)
    if cap is not None:
        while max_r > 0 and xi_degree(max_r) > cap:
            max_r -= 1
        if p.h_tail >= 1:
            max_r = 0
            while xi_degree(max_r + 1) <= cap:
                max_r += 1

    out: list[MilnorElt] = []

    def rec_r(j, r_acc, deg):
        if j > max_r:
            rec_e(0, [], deg, tuple(r_acc))
            return
        hj = p.hv(j)
        bound = 0 if hj == 0 else (INF if _is_inf(hj) else 2 ** int(hj) - 1)
        if cap is not None:
            bound = min(bound, (cap - deg) // xi_degree(j))
        if _is_inf(bound):
            raise DomainError("unbounded enumeration")
        for v in range(int(bound) + 1):
            rec_r(j + 1, r_acc + [v], deg + v * xi_degree(j))

    def rec_e(i, e_acc, deg, r):
        if i >= max_e:
            out.append(MilnorElt(tuple(e_acc), r))
            return
        rec_e(i + 1, e_acc + [0], deg, r)
        if p.kv(i) >= 1 and (cap is None or deg + tau_degree(i) <= cap):
            rec_e(i + 1, e_acc + [1], deg + tau_degree(i), r)

    rec_r(1, [], 0)
    out.sort(key=lambda m: (m.topdeg, m.weight, m.E, m.R))
    return out


# --- the mod-tau quotient profile -----------------------------------------


@dataclass(frozen=True)
class TauProfile:
    """Profile (h, l) for A/tau; l only takes values 0 and 1."""

    h: tuple = ()
    l: tuple = ()
    h_tail: object = 0
    l_tail: int = 0

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.l) or self.l_tail not in (0, 1):
            raise StructureError("l takes only values 0 and 1")
        object.__setattr__(self, "h", _norm_tail(self.h, self.h_tail))
        object.__setattr__(self, "l", _norm_tail(self.l, self.l_tail))

    def hv(self, i: int):
        if i < 1:
            raise DomainError("h is indexed from 1")
        return self.h[i - 1] if i - 1 < len(self.h) else self.h_tail

    def lv(self, j: int) -> int:
        if j < 0:
            raise DomainError("l is indexed from 0")
        return self.l[j] if j < len(self.l) else self.l_tail

    @property
    def window(self) -> int:
        return max(len(self.h), len(self.l), 1) + 2


def mod_tau_profile(p: Profile) -> TauProfile:
    """The shadow (h, l) with l = min(k, 1); tau_j is exterior in A/tau."""
    w = p.window
    l = tuple(min(int(p.kv(j) >= 1), 1) for j in range(w + 1))
    return TauProfile(h=p.h, l=l, h_tail=p.h_tail,
                      l_tail=1 if p.k_tail >= 1 else 0)


def check_cond1tau(tp: TauProfile) -> tuple[bool, tuple[int, int] | None]:
    w = tp.window
    for i in range(1, w + 1):
        for j in range(1, w + 1):
            if tp.hv(i) <= j + tp.hv(i + j) or tp.hv(j) <= tp.hv(i + j):
                continue
            return False, (i, j)
    return True, None


def check_cond2tau(tp: TauProfile) -> tuple[bool, tuple[int, int] | None]:
    """For i >= 1, j >= 0 with l(i+j) = 0: h(i) <= j or l(j) = 0."""
    w = tp.window
    for i in range(1, w + 1):
        for j in range(0, w + 1):
            if tp.lv(i + j) != 0:
                continue
            if tp.hv(i) <= j or tp.lv(j) == 0:
                continue
            return False, (i, j)
    return True, None


# --- the dual quotient ring, monomial by monomial --------------------------


@dataclass(frozen=True)
class DualMonomial:
    """Normal form tau^a tau^E xi^R in the dual algebra (E entries 0/1)."""

    a: int
    E: tuple[int, ...]
    R: tuple[int, ...]

    @property
    def topdeg(self) -> int:
        t = sum(e * (2 ** (i + 1) - 1) for i, e in enumerate(self.E))
        t += sum(r * (2 ** (j + 2) - 2) for j, r in enumerate(self.R))
        return t

    @property
    def weight(self) -> int:
        w = self.a
        w += sum(e * (2 ** i - 1) for i, e in enumerate(self.E))
        w += sum(r * (2 ** (j + 1) - 1) for j, r in enumerate(self.R))
        return w


def dual_mul(x: DualMonomial, y: DualMonomial) -> DualMonomial:
    """Product in M2[tau_i, xi_j]/(tau_i^2 = tau xi_{i+1}); stays a monomial."""
    n = max(len(x.E), len(y.E))
    e, extra_r, a = [], {}, x.a + y.a
    for i in range(n):
        s = (x.E[i] if i < len(x.E) else 0) + (y.E[i] if i < len(y.E) else 0)
        if s == 2:
            a += 1
            extra_r[i + 1] = extra_r.get(i + 1, 0) + 1
            e.append(0)
        else:
            e.append(s)
    m = max(len(x.R), len(y.R), max(extra_r, default=0))
    r = []
    for j in range(1, m + 1):
        v = (x.R[j - 1] if j - 1 < len(x.R) else 0)
        v += (y.R[j - 1] if j - 1 < len(y.R) else 0)
        v += extra_r.get(j, 0)
        r.append(v)
    return DualMonomial(a, _norm_tail(e, 0), _norm_tail(r, 0))


def ideal_generators(p: Profile, topdeg_cap: int) -> list[DualMonomial]:
    """Normal forms of the defining relations of I(h,k) up to the cap.

    xi_i^(2^h(i)) stays as written; tau_j^(2^k(j)) is tau_j when k=0 and
    tau^(2^(k-1)) xi_{j+1}^(2^(k-1)) when k >= 1.
    """
    gens = []
    i = 1
    while 2 ** (i + 1) - 2 <= topdeg_cap:
        hv = p.hv(i)
        if not _is_inf(hv):
            r = [0] * i
            r[i - 1] = 2 ** int(hv)
            g = DualMonomial(0, (), tuple(r))
            if g.topdeg <= topdeg_cap:
                gens.append(g)
        i += 1
    j = 0
    while 2 ** (j + 1) - 1 <= topdeg_cap:
        kv = p.kv(j)
        if not _is_inf(kv):
            kv = int(kv)
            if kv == 0:
                e = [0] * (j + 1)
                e[j] = 1
                g = DualMonomial(0, tuple(e), ())
            else:
                r = [0] * (j + 1)
                r[j] = 2 ** (kv - 1)
                g = DualMonomial(2 ** (kv - 1), (), tuple(r))
            if g.topdeg <= topdeg_cap:
                gens.append(g)
        j += 1
    return gens


def _free_monomials_at(topdeg: int) -> list[DualMonomial]:
    """All normal-form monomials tau^0 tau^E xi^R of the given topdeg."""
    out = []

    def rec_e(i, e_acc, rem):
        d = 2 ** (i + 1) - 1
        if d > rem:
            rec_r(1, [], rem, _norm_tail(e_acc, 0))
            return
        rec_e(i + 1, e_acc + [0], rem)
        rec_e(i + 1, e_acc + [1], rem - d)

    def rec_r(j, r_acc, rem, e):
        d = 2 ** (j + 1) - 2
        if d > rem:
            if rem == 0:
                out.append(DualMonomial(0, e, _norm_tail(r_acc, 0)))
            return
        top = rem // d
        for v in range(top + 1):
            rec_r(j + 1, r_acc + [v], rem - v * d, e)

    rec_e(0, [], topdeg)
    return out


def quotient_entries_at(p: Profile, topdeg: int, gens=None, tau_probe: int = 12):
    """Entries (monomial, c) of B(h,k) = A/I(h,k) in one topological degree.

    c is the minimal power with tau^c m in I, or None when no power is
    (a free generator).  The ideal slice is spanned by monomials, so the
    relation matrix against the ambient basis is diagonal and this list
    carries the whole M2-module structure.  tau_probe bounds the search
    for c; it only needs to exceed the largest tau power carried by a
    generator plus the possible carries, and 12 covers values up to 10.
    """
    if gens is None:
        gens = ideal_generators(p, topdeg)

    def min_torsion(m: DualMonomial) -> int | None:
        for c in range(tau_probe + 1):
            if _monomial_in_ideal(DualMonomial(c, m.E, m.R), gens):
                return c
        return None

    return [(m, min_torsion(m)) for m in _free_monomials_at(topdeg)]


def quotient_structure(p: Profile, topdeg_cap: int, tau_probe: int = 12):
    """dict topdeg -> quotient_entries_at for 0 <= topdeg <= cap."""
    gens = ideal_generators(p, topdeg_cap)
    return {t: quotient_entries_at(p, t, gens, tau_probe)
            for t in range(topdeg_cap + 1)}


def _divides(g: DualMonomial, x: DualMonomial) -> bool:
    """Does x = m * g for some normal-form monomial m?

    Division accounts for the carry tau_i * tau_i = tau xi_{i+1}: when g
    contains tau_i but x does not, the quotient may contain tau_i with a
    carry into tau and xi_{i+1}.
    """
    # R-part of g must be extractable, possibly after carries.
    carries = []
    for i, e in enumerate(g.E):
        if not e:
            continue
        xe = x.E[i] if i < len(x.E) else 0
        if xe == 0:
            carries.append(i)
    need_r = list(g.R) + [0] * max(0, len(x.R) - len(g.R))
    for i in carries:
        if i + 1 <= len(need_r):
            need_r[i] += 1
        else:
            need_r += [0] * (i + 1 - len(need_r))
            need_r[i] += 1
    for j, r in enumerate(need_r):
        xr = x.R[j] if j < len(x.R) else 0
        if xr < r:
            return False
    need_a = g.a + len(carries)
    return x.a >= need_a


def _monomial_in_ideal(x: DualMonomial, gens: list[DualMonomial]) -> bool:
    return any(_divides(g, x) for g in gens)


def quotient_shapes(p: Profile, topdeg_cap: int, tau_probe: int = 12) -> dict[int, TauModuleShape]:
    """Shape of B(h,k) in each topdeg, via tau_smith on the relation matrix."""
    shapes = {}
    for t, entries in quotient_structure(p, topdeg_cap, tau_probe).items():
        rw = tuple(m.weight for m, _ in entries)
        cols, cw = [], []
        for idx, (m, c) in enumerate(entries):
            if c is not None:
                cols.append(idx)
                cw.append(m.weight + c)
        rows = [0] * len(entries)
        for out_j, idx in enumerate(cols):
            rows[idx] |= 1 << out_j
        res = tau_smith(GradedTauMatrix(rw, tuple(cw), tuple(rows)))
        shapes[t] = res.shape
    return shapes


def has_torsion(p: Profile, topdeg_cap: int, tau_probe: int = 12):
    """First tau-torsion witness (topdeg, monomial, exponent) or None."""
    gens = ideal_generators(p, topdeg_cap)
    for t in range(topdeg_cap + 1):
        for m, c in quotient_entries_at(p, t, gens, tau_probe):
            if c is not None and c > 0:
                return (t, m, c)
    return None


def nonfree_torsion_witness(p: Profile, tau_probe: int = 12):
    """A verified tau-torsion class in B(h,k) for a non-free profile.

    If freeness fails at index i, the monomial xi_{i+1}^max(2^(k(i)-1), 1)
    survives in the quotient while a tau power of it does not; both
    memberships are checked against the ideal, so the returned witness
    (topdeg, monomial, exponent) is certified, not just predicted.
    Returns None when the profile is free.
    """
    for i in range(0, p.window + 1):
        k = p.kv(i)
        bound = 0 if k == 0 else k - 1
        if p.hv(i + 1) <= bound:
            continue
        power = 1 if k == 0 else 2 ** int(k - 1)
        r = [0] * (i + 1)
        r[i] = power
        m = DualMonomial(0, (), tuple(r))
        gens = ideal_generators(p, m.topdeg)
        if _monomial_in_ideal(m, gens):
            raise StructureError("predicted witness unexpectedly in the ideal")
        for c in range(1, tau_probe + 1):
            if _monomial_in_ideal(DualMonomial(c, m.E, m.R), gens):
                return (m.topdeg, m, c)
        raise StructureError("predicted witness is not torsion")
    return None


def free_rank_poincare(p: Profile, topdeg_cap: int) -> dict[int, int]:
    """Free rank of B(h,k) per topdeg (torsion-free profiles: the whole story)."""
    out = {}
    for t, entries in quotient_structure(p, topdeg_cap).items():
        out[t] = sum(1 for _, c in entries if c is None)
    return out


# --- profile literals -------------------------------------------------------


def parse_profile(text: str) -> Profile:
    """Parse ``A(2)`` or ``h=[1,0] k=[2,1,0]``.

    ``inf`` is allowed as a value; a trailing ``...`` repeats the last
    value forever, so ``h=[1,...]`` is the constant function 1.
    """
    from .errors import ParseError
    import re

    text = text.strip()
    m = re.fullmatch(r"A\((\d+)\)", text)
    if m:
        return a_profile(int(m.group(1)))

    def parse_list(body):
        body = body.strip()
        if not body:
            return (), 0
        toks = [t.strip() for t in body.split(",")]
        tail = 0
        if toks and toks[-1] == "...":
            toks.pop()
            if not toks:
                raise ParseError("'...' needs a preceding value")
            tail = None  # repeat last
        vals = []
        for tok in toks:
            if tok == "inf":
                vals.append(INF)
            elif tok:
                try:
                    vals.append(int(tok))
                except ValueError as exc:
                    raise ParseError(f"bad profile value {tok!r}") from exc
            else:
                raise ParseError("empty profile value")
        if tail is None:
            tail = vals[-1]
        return tuple(vals), tail

    hm = re.search(r"h=\[([^\]]*)\]", text)
    km = re.search(r"k=\[([^\]]*)\]", text)
    if not hm or not km:
        raise ParseError(f"cannot parse profile literal {text!r}")
    h, ht = parse_list(hm.group(1))
    k, kt = parse_list(km.group(1))
    return Profile(h=h, k=k, h_tail=ht, k_tail=kt)
