"""Exact arithmetic in the mod-2 motivic Steenrod algebra over F2[tau].

Elements are stored in the Milnor basis.  A monomial operation rho(E, R)
is dual to tau^E xi^R in the dual algebra; E is a 0/1 sequence indexed
from 0 and R a nonnegative sequence indexed from 1, with

    bidegree = (sum e_i (2^(i+1) - 1) + sum r_j (2^(j+1) - 2),
                sum e_i (2^i - 1)     + sum r_j (2^j - 1)).

Products are computed through the embedding into the tau-inverted
classical Steenrod algebra: rho(E, R) maps to a tau-multiple of the
classical Milnor element P^S with s_j = e_{j-1} + 2 r_j, the classical
matrix product formula is applied there, and each resulting P^S pulls
back along the unique splitting e'_{j-1} = s_j mod 2, r'_j = (s_j -
e'_{j-1}) / 2.  The tau exponent on every output term is forced by
weight; a negative forced exponent can never occur and is treated as an
internal error.

A bihomogeneous element of bidegree (t, w) is a set of monomials b of
topological degree t and weight <= w; the coefficient of b is the
monomial tau^(w - weight(b)).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .errors import DegreeCapError, DegreeError, DomainError, InternalError, ParseError

DEFAULT_DEGREE_CAP = 64
_degree_cap = DEFAULT_DEGREE_CAP


def _check_degree(t: int) -> None:
    if t > _degree_cap:
        raise DegreeCapError(
            f"topological degree {t} exceeds cap {_degree_cap}; "
            "wrap the computation in motsteen.milnor.raised_degree_cap if intended"
        )


class raised_degree_cap:
    """Context manager that temporarily raises the topological degree cap.

    The cap exists so runaway computations fail loudly instead of
    churning; known-large but legitimate products (squares of high
    Milnor primitives, say) opt in explicitly.
    """

    def __init__(self, cap: int):
        self.cap = cap

    def __enter__(self):
        global _degree_cap
        self._saved = _degree_cap
        _degree_cap = max(_degree_cap, self.cap)
        return self

    def __exit__(self, *exc):
        global _degree_cap
        _degree_cap = self._saved
        return False


def _trim(seq) -> tuple[int, ...]:
    seq = list(seq)
    while seq and seq[-1] == 0:
        seq.pop()
    return tuple(seq)


@dataclass(frozen=True, order=True)
class MilnorElt:
    """A Milnor basis operation rho(E, R)."""

    E: tuple[int, ...] = ()
    R: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "E", _trim(self.E))
        object.__setattr__(self, "R", _trim(self.R))
        if any(e not in (0, 1) for e in self.E):
            raise DegreeError("E entries must be 0 or 1")
        if any(r < 0 for r in self.R):
            raise DegreeError("R entries must be nonnegative")

    @property
    def topdeg(self) -> int:
        t = sum(e * (2 ** (i + 1) - 1) for i, e in enumerate(self.E))
        t += sum(r * (2 ** (j + 2) - 2) for j, r in enumerate(self.R))
        return t

    @property
    def weight(self) -> int:
        w = sum(e * (2 ** i - 1) for i, e in enumerate(self.E))
        w += sum(r * (2 ** (j + 1) - 1) for j, r in enumerate(self.R))
        return w

    def bidegree(self) -> tuple[int, int]:
        return (self.topdeg, self.weight)

    def classical(self) -> tuple[int, ...]:
        """The exponent sequence S of the classical image P^S, s_j = e_{j-1} + 2 r_j."""
        n = max(len(self.E), len(self.R))
        out = []
        for j in range(1, n + 1):
            e = self.E[j - 1] if j - 1 < len(self.E) else 0
            r = self.R[j - 1] if j - 1 < len(self.R) else 0
            out.append(e + 2 * r)
        return _trim(out)

    @classmethod
    def from_classical(cls, s: tuple[int, ...]) -> "MilnorElt":
        e = tuple(v & 1 for v in s)
        r = tuple(v >> 1 for v in s)
        return cls(e, r)

    def sort_key(self):
        """Right-lexicographic key on the classical sequence.

        Sequences are trailing-trimmed, so a longer sequence dominates;
        at equal length the reversed tuple compares entries from the top
        index down.
        """
        s = self.classical()
        return (len(s), tuple(reversed(s)))

    def __str__(self) -> str:
        parts = []
        for i, e in enumerate(self.E):
            if e:
                parts.append(f"Q({i})")
        if self.R:
            parts.append("Sq(" + ",".join(str(r) for r in self.R) + ")")
        return "".join(parts) or "1"


UNIT_ELT = MilnorElt()


def bidegree(m: MilnorElt) -> tuple[int, int]:
    return m.bidegree()


@dataclass(frozen=True)
class AlgebraElement:
    """Bihomogeneous element of the motivic Steenrod algebra.

    The term b carries the implied coefficient tau^(weight - weight(b)).
    Terms whose forced exponent would be negative are illegal.
    """

    topdeg: int
    weight: int
    terms: frozenset[MilnorElt] = frozenset()

    def __post_init__(self):
        for b in self.terms:
            if b.topdeg != self.topdeg:
                raise DegreeError(
                    f"term {b} has topdeg {b.topdeg}, element declared {self.topdeg}")
            if b.weight > self.weight:
                raise DegreeError(
                    f"term {b} has weight {b.weight} above element weight {self.weight}")

    def is_zero(self) -> bool:
        return not self.terms

    def tau_exp(self, b: MilnorElt) -> int:
        return self.weight - b.weight

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        if (self.topdeg, self.weight) != (other.topdeg, other.weight):
            raise DegreeError("cannot add elements of different bidegree")
        return AlgebraElement(self.topdeg, self.weight,
                              self.terms ^ other.terms)

    def times_tau(self, k: int = 1) -> "AlgebraElement":
        if k < 0:
            raise DegreeError("cannot divide by tau")
        return AlgebraElement(self.topdeg, self.weight + k, self.terms)

    def sorted_terms(self) -> list[MilnorElt]:
        return sorted(self.terms, key=lambda b: (b.E, b.R))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for b in self.sorted_terms():
            e = self.tau_exp(b)
            parts.append((f"t^{e} " if e else "") + str(b))
        return " + ".join(parts)


def zero(topdeg: int = 0, weight: int = 0) -> AlgebraElement:
    return AlgebraElement(topdeg, weight, frozenset())


def unit() -> AlgebraElement:
    return AlgebraElement(0, 0, frozenset([UNIT_ELT]))


def from_milnor(b: MilnorElt, tau_exp: int = 0) -> AlgebraElement:
    return AlgebraElement(b.topdeg, b.weight + tau_exp, frozenset([b]))


def q_element(i: int) -> AlgebraElement:
    """Q_i, dual to tau_i."""
    if i < 0:
        raise DomainError("Q index must be >= 0")
    e = [0] * (i + 1)
    e[i] = 1
    return from_milnor(MilnorElt(tuple(e), ()))


def p_element(s: int, t: int) -> AlgebraElement:
    """P_t^s, dual to xi_t^(2^(s-1))."""
    if s < 1 or t < 1:
        raise DomainError("P_t^s requires s, t >= 1")
    r = [0] * t
    r[t - 1] = 2 ** (s - 1)
    return from_milnor(MilnorElt((), tuple(r)))


def sq(k: int) -> AlgebraElement:
    """The motivic Steenrod square Sq^k (Sq^0 = 1) in Milnor form."""
    if k < 0:
        raise DomainError("Sq^k requires k >= 0")
    if k == 0:
        return unit()
    if k % 2 == 0:
        return from_milnor(MilnorElt((), (k // 2,)))
    return from_milnor(MilnorElt((1,), (k // 2,)))


# --- classical mod-2 Milnor multiplication -------------------------------


def _multinomial_odd(parts: tuple[int, ...]) -> bool:
    """Multinomial coefficient of parts is odd iff their binary digits are disjoint."""
    total, ored = 0, 0
    for p in parts:
        total += p
        ored |= p
    return total == ored


@lru_cache(maxsize=65536)
def classical_product(r: tuple[int, ...], s: tuple[int, ...]) -> frozenset[tuple[int, ...]]:
    """Milnor's matrix formula for Sq(r) Sq(s) in the classical mod-2 algebra."""
    if not r or not s:
        base = r or s
        return frozenset([_trim(base)])
    m, n = len(r), len(s)
    results: dict[tuple[int, ...], int] = {}

    # x[i][j] for 1 <= i <= m, 1 <= j <= n; row 0 and column 0 are implied.
    def rec(i, row_rem, col_used, x):
        if i > m:
            cols_ok = all(col_used[j] <= s[j - 1] for j in range(1, n + 1))
            if not cols_ok:
                return
            t_len = m + n
            diag_parts = [[] for _ in range(t_len + 1)]
            # row 0: x_{0j} = s_j - sum_i x_{ij}
            for j in range(1, n + 1):
                diag_parts[j].append(s[j - 1] - col_used[j])
            # column 0: x_{i0} = leftover of r_i
            for ii in range(1, m + 1):
                diag_parts[ii].append(row_rem[ii])
            for ii in range(1, m + 1):
                for jj in range(1, n + 1):
                    diag_parts[ii + jj].append(x[ii][jj])
            coeff = all(_multinomial_odd(tuple(p)) for p in diag_parts[1:])
            if not coeff:
                return
            t = _trim(sum(diag_parts[k]) for k in range(1, t_len + 1))
            results[t] = results.get(t, 0) ^ 1
            return

        def fill(j, rem):
            if j > n:
                row_rem[i] = rem
                rec(i + 1, row_rem, col_used, x)
                row_rem[i] = 0
                return
            step = 1 << j
            v = 0
            while v * step <= rem and col_used[j] + v <= s[j - 1]:
                x[i][j] = v
                col_used[j] += v
                fill(j + 1, rem - v * step)
                col_used[j] -= v
                x[i][j] = 0
                v += 1

        fill(1, r[i - 1])

    x0 = [[0] * (n + 1) for _ in range(m + 1)]
    rec(1, [0] * (m + 1), [0] * (n + 1), x0)
    return frozenset(t for t, c in results.items() if c)


def product(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Product in the motivic Steenrod algebra, tau exponents forced by weight."""
    topdeg = x.topdeg + y.topdeg
    weight = x.weight + y.weight
    _check_degree(topdeg)
    acc: set[MilnorElt] = set()
    for b in x.terms:
        sb = b.classical()
        for c in y.terms:
            sc = c.classical()
            for s_res in classical_product(sb, sc):
                acc ^= {MilnorElt.from_classical(s_res)}
    for d in acc:
        if d.weight > weight:
            raise InternalError(
                f"product term {d} would need tau^{weight - d.weight} < 0")
    return AlgebraElement(topdeg, weight, frozenset(acc))


def product_mod_tau(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    return reduce_mod_tau(product(x, y))


def reduce_mod_tau(x: AlgebraElement) -> AlgebraElement:
    """Image in A/tau: keep exactly the terms with forced tau exponent 0."""
    kept = frozenset(b for b in x.terms if b.weight == x.weight)
    return AlgebraElement(x.topdeg, x.weight, kept)


def commutator_check(n: int) -> bool:
    """Verify Q_(m+1) = [Q_m, Sq^(2^(m+1))] for all 0 <= m <= n via product."""
    for m in range(n + 1):
        s = sq(2 ** (m + 1))
        qm = q_element(m)
        lhs = product(qm, s) + product(s, qm)
        if lhs != q_element(m + 1):
            return False
    return True


# --- Adem relations and the admissible basis ------------------------------


@dataclass(frozen=True)
class SqWord:
    """A composite Sq^(i_1)...Sq^(i_k) with an overall tau power in front."""

    word: tuple[int, ...]
    tau: int = 0

    def __post_init__(self):
        if any(i <= 0 for i in self.word):
            raise DegreeError("Sq exponents in a word must be positive")
        if self.tau < 0:
            raise DegreeError("tau power must be nonnegative")

    @property
    def topdeg(self) -> int:
        return sum(self.word)

    @property
    def weight(self) -> int:
        return self.tau + sum(i // 2 for i in self.word)

    def is_admissible(self) -> bool:
        return all(self.word[j - 1] >= 2 * self.word[j] for j in range(1, len(self.word)))

    def __str__(self) -> str:
        body = "".join(f"Sq^{i}" for i in self.word) or "1"
        return (f"t^{self.tau} " if self.tau else "") + body


def _binom_odd(n: int, k: int) -> bool:
    return 0 <= k <= n and (n - k) & k == 0


def adem_expand(a: int, b: int) -> list[SqWord]:
    """Motivic Adem expansion of Sq^a Sq^b for 0 < a < 2b.

    Each summand tau^e Sq^(a+b-j) Sq^j appears with e = 1 exactly when a
    and b are even and j is odd; binomials are reduced mod 2 and the
    j = 0 term collapses to a single square.
    """
    if a <= 0 or b <= 0:
        raise DomainError("adem_expand requires positive degrees")
    if a >= 2 * b:
        raise DomainError(f"Sq^{a} Sq^{b} is already admissible")
    _check_degree(a + b)
    out = []
    for j in range(a // 2 + 1):
        if not _binom_odd(b - 1 - j, a - 2 * j):
            continue
        e = 1 if (a % 2 == 0 and b % 2 == 0 and j % 2 == 1) else 0
        word = (a + b - j,) if j == 0 else (a + b - j, j)
        out.append(SqWord(word, e))
    return out


def sqword_to_milnor(w: SqWord) -> AlgebraElement:
    """Milnor form of a word: the product of the Milnor images of its letters."""
    acc = unit()
    for i in w.word:
        acc = product(acc, sq(i))
    return acc.times_tau(w.tau)


def _admissible_word_for(b: MilnorElt) -> tuple[int, ...]:
    # i_j = s_j + 2 i_{j+1} reproduces b as the leading right-lex term.
    s = b.classical()
    word = []
    nxt = 0
    for j in range(len(s), 0, -1):
        i_j = s[j - 1] + 2 * nxt
        word.append(i_j)
        nxt = i_j
    word.reverse()
    return tuple(word)


def milnor_to_sqword(x: AlgebraElement) -> list[SqWord]:
    """Write x in the admissible basis.

    Greedy triangular elimination: the right-lex maximal Milnor term of
    an admissible word Sq^I is the monomial with s_j = i_j - 2 i_{j+1},
    with tau exponent 0, so peeling maximal terms terminates.
    """
    out: list[SqWord] = []
    cur = x
    guard = 0
    while not cur.is_zero():
        guard += 1
        if guard > 10000:
            raise InternalError("milnor_to_sqword failed to terminate")
        lead = max(cur.terms, key=MilnorElt.sort_key)
        word = _admissible_word_for(lead)
        tau_exp = cur.weight - lead.weight
        if tau_exp < 0:
            raise InternalError("negative tau exponent during basis conversion")
        w = SqWord(word, tau_exp)
        if not w.is_admissible():
            raise InternalError(f"constructed inadmissible word {w}")
        expansion = sqword_to_milnor(w)
        if max(expansion.terms, key=MilnorElt.sort_key) != lead:
            raise InternalError("triangularity violated in basis conversion")
        cur = cur + expansion
        if not cur.is_zero():
            new_lead = max(cur.terms, key=MilnorElt.sort_key)
            if new_lead.sort_key() >= lead.sort_key():
                raise InternalError("no progress in basis conversion")
        out.append(w)
    return sorted(out, key=lambda w: (w.word, w.tau))


# --- text syntax -----------------------------------------------------------

_TERM_RE = re.compile(
    r"^\s*(?:t\^(?P<tau>\d+)\s*)?(?P<body>(?:Q\(\d+\)\s*)*(?:Sq\((?:\d+\s*,\s*)*\d+\))?|1)\s*$"
)
_Q_RE = re.compile(r"Q\((\d+)\)")
_SQ_RE = re.compile(r"Sq\(([0-9,\s]*)\)")


def parse_element(text: str) -> AlgebraElement:
    """Parse the canonical element syntax, e.g. ``t^2 Q(0)Sq(3,1) + Sq(2)``.

    All terms must imply the same bidegree; the element weight is the
    common value of tau-exponent + term weight.
    """
    chunks = [c for c in text.split("+")]
    if not chunks or not text.strip():
        raise ParseError("empty element")
    if text.strip() == "0":
        raise ParseError("a bare 0 has no bidegree; spell the element out")
    parsed = []
    for chunk in chunks:
        m = _TERM_RE.match(chunk)
        if not m or (m.group("body") == "" and m.group("tau") is None):
            raise ParseError(f"bad term syntax: {chunk.strip()!r}")
        tau_exp = int(m.group("tau") or 0)
        body = m.group("body")
        e_idx = [int(i) for i in _Q_RE.findall(body)]
        if sorted(set(e_idx)) != sorted(e_idx):
            raise ParseError(f"repeated Q factor in {chunk.strip()!r}")
        sq_m = _SQ_RE.search(body)
        r = ()
        if sq_m:
            r = tuple(int(v) for v in sq_m.group(1).replace(" ", "").split(",") if v)
        e = [0] * (max(e_idx) + 1 if e_idx else 0)
        for i in e_idx:
            e[i] = 1
        parsed.append((tau_exp, MilnorElt(tuple(e), r)))
    bidegrees = {(b.topdeg, b.weight + t) for t, b in parsed}
    if len(bidegrees) != 1:
        raise ParseError(f"terms of mixed bidegree: {sorted(bidegrees)}")
    (topdeg, weight), = bidegrees
    terms = frozenset()
    for _, b in parsed:
        terms ^= {b}
    return AlgebraElement(topdeg, weight, terms)


def format_element(x: AlgebraElement) -> str:
    return str(x)
