"""Exact graded linear algebra over F2 and over F2[tau].

Rows are bit-packed into python ints, so a row operation is a single
XOR.  Graded matrices over F2[tau] store only incidence bits: a
weight-homogeneous map forces every nonzero entry at (i, j) to be the
single monomial tau^(col_weight[j] - row_weight[i]), so no polynomial
arithmetic is needed anywhere.  Cells whose forced exponent would be
negative must be zero.

The graded Smith normal form here exploits that structure: the usual
division steps degenerate to XORs because the pivot always has the
globally minimal exponent.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import MatrixCapError, StructureError

DEFAULT_MAX_BITS = 1 << 20
ENV_MAX_BITS = "MOTSTEEN_MAX_BITS"


def max_bits() -> int:
    raw = os.environ.get(ENV_MAX_BITS)
    if raw is None:
        return DEFAULT_MAX_BITS
    try:
        value = int(raw)
    except ValueError as exc:
        raise StructureError(f"{ENV_MAX_BITS} must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise StructureError(f"{ENV_MAX_BITS} must be positive")
    return value


def _check_cap(nrows: int, ncols: int) -> None:
    if nrows * ncols > max_bits():
        raise MatrixCapError(
            f"matrix of {nrows}x{ncols} = {nrows * ncols} bits exceeds cap "
            f"{max_bits()} (override with {ENV_MAX_BITS})"
        )


@dataclass(frozen=True)
class F2Matrix:
    """Dense matrix over F2; rows[i] holds column bits, LSB = column 0."""

    nrows: int
    ncols: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if self.nrows < 0 or self.ncols < 0 or len(self.rows) != self.nrows:
            raise StructureError("row count does not match bit storage")
        _check_cap(self.nrows, self.ncols)
        mask = (1 << self.ncols) - 1
        for r in self.rows:
            if r < 0 or r & ~mask:
                raise StructureError("row bits outside column range")

    @classmethod
    def from_rows(cls, data, ncols=None) -> "F2Matrix":
        data = [list(row) for row in data]
        if ncols is None:
            ncols = len(data[0]) if data else 0
        rows = []
        for row in data:
            if len(row) != ncols:
                raise StructureError("ragged rows")
            bits = 0
            for j, v in enumerate(row):
                if v & 1:
                    bits |= 1 << j
            rows.append(bits)
        return cls(len(data), ncols, tuple(rows))

    @classmethod
    def zeros(cls, nrows, ncols) -> "F2Matrix":
        return cls(nrows, ncols, (0,) * nrows)

    @classmethod
    def identity(cls, n) -> "F2Matrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    def entry(self, i, j) -> int:
        return (self.rows[i] >> j) & 1

    def is_zero(self) -> bool:
        return all(r == 0 for r in self.rows)

    def add(self, other: "F2Matrix") -> "F2Matrix":
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise StructureError("shape mismatch in add")
        return F2Matrix(self.nrows, self.ncols,
                        tuple(a ^ b for a, b in zip(self.rows, other.rows)))

    def mul(self, other: "F2Matrix") -> "F2Matrix":
        """Matrix product self @ other."""
        if self.ncols != other.nrows:
            raise StructureError("shape mismatch in mul")
        out = []
        for r in self.rows:
            acc = 0
            rr = r
            while rr:
                j = (rr & -rr).bit_length() - 1
                acc ^= other.rows[j]
                rr &= rr - 1
            out.append(acc)
        return F2Matrix(self.nrows, other.ncols, tuple(out))

    def matvec(self, v: int) -> int:
        """Apply to a column vector given as a column bitmask; returns row bitmask."""
        out = 0
        for i, r in enumerate(self.rows):
            if bin(r & v).count("1") & 1:
                out |= 1 << i
        return out

    def transpose(self) -> "F2Matrix":
        cols = [0] * self.ncols
        for i, r in enumerate(self.rows):
            rr = r
            while rr:
                j = (rr & -rr).bit_length() - 1
                cols[j] |= 1 << i
                rr &= rr - 1
        return F2Matrix(self.ncols, self.nrows, tuple(cols))

    def to_lists(self):
        return [[(r >> j) & 1 for j in range(self.ncols)] for r in self.rows]


def rank_nullspace(m: F2Matrix) -> tuple[int, F2Matrix]:
    """Rank and a nullspace basis (rows of the returned matrix).

    Pivots are chosen left to right, so the output is deterministic and
    invariant under row permutations of the input.
    """
    rows = list(m.rows)
    pivot_of_col: dict[int, int] = {}
    rank = 0
    for i in range(m.nrows):
        r = rows[i]
        while r:
            j = (r & -r).bit_length() - 1
            if j in pivot_of_col:
                r ^= rows[pivot_of_col[j]]
            else:
                pivot_of_col[j] = i
                rows[i] = r
                rank += 1
                break
        else:
            rows[i] = 0
    # Back-substitute to reduced form so nullspace vectors read off directly.
    for j in sorted(pivot_of_col, reverse=True):
        pr = rows[pivot_of_col[j]]
        for jj, ii in pivot_of_col.items():
            if ii != pivot_of_col[j] and (rows[ii] >> j) & 1:
                rows[ii] ^= pr
    free_cols = [j for j in range(m.ncols) if j not in pivot_of_col]
    basis = []
    for f in free_cols:
        v = 1 << f
        for j, i in pivot_of_col.items():
            if (rows[i] >> f) & 1:
                v |= 1 << j
        basis.append(v)
    return rank, F2Matrix(len(basis), m.ncols, tuple(basis))


def solve_f2(columns: list[int], target: int) -> int | None:
    """Solve sum_{a in S} columns[a] == target over F2.

    Returns a bitmask over column indices, or None when inconsistent.
    Column vectors are row-index bitmasks.
    """
    basis: list[tuple[int, int]] = []  # (vector, combo)
    for idx, col in enumerate(columns):
        v, c = col, 1 << idx
        for bv, bc in basis:
            if v & (bv & -bv):
                v ^= bv
                c ^= bc
        if v:
            basis.append((v, c))
            basis.sort(key=lambda t: t[0] & -t[0])
    v, c = target, 0
    for bv, bc in basis:
        if v & (bv & -bv):
            v ^= bv
            c ^= bc
    return c if v == 0 else None


@dataclass(frozen=True)
class TauModuleShape:
    """Isomorphism type of a finitely generated graded F2[tau]-module."""

    free_rank: int
    torsion: tuple[int, ...] = ()

    def __post_init__(self):
        if self.free_rank < 0 or any(d <= 0 for d in self.torsion):
            raise StructureError("invalid module shape")
        object.__setattr__(self, "torsion", tuple(sorted(self.torsion)))

    def is_zero(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    def f2_dim_at(self, offsets_free, offsets_torsion):  # pragma: no cover - helper
        raise NotImplementedError


@dataclass(frozen=True)
class GradedTauMatrix:
    """Weight-homogeneous matrix over F2[tau].

    Columns index the domain basis, rows the codomain basis.  A set bit
    at (i, j) means the entry tau^(col_weights[j] - row_weights[i]); the
    invariant requires that exponent to be >= 0 wherever a bit is set.
    """

    row_weights: tuple[int, ...]
    col_weights: tuple[int, ...]
    rows: tuple[int, ...]

    def __post_init__(self):
        nr, nc = len(self.row_weights), len(self.col_weights)
        if len(self.rows) != nr:
            raise StructureError("row count does not match weights")
        _check_cap(nr, nc)
        mask = (1 << nc) - 1
        for i, r in enumerate(self.rows):
            if r < 0 or r & ~mask:
                raise StructureError("row bits outside column range")
            rr = r
            while rr:
                j = (rr & -rr).bit_length() - 1
                if self.col_weights[j] - self.row_weights[i] < 0:
                    raise StructureError(
                        f"entry ({i},{j}) requires negative tau exponent "
                        f"{self.col_weights[j] - self.row_weights[i]}"
                    )
                rr &= rr - 1

    @property
    def nrows(self) -> int:
        return len(self.row_weights)

    @property
    def ncols(self) -> int:
        return len(self.col_weights)

    def entry_exp(self, i, j) -> int | None:
        """Tau exponent of a nonzero entry, None when the cell is zero."""
        if (self.rows[i] >> j) & 1:
            return self.col_weights[j] - self.row_weights[i]
        return None

    def is_zero(self) -> bool:
        return all(r == 0 for r in self.rows)

    def add(self, other: "GradedTauMatrix") -> "GradedTauMatrix":
        if (self.row_weights, self.col_weights) != (other.row_weights, other.col_weights):
            raise StructureError("weight mismatch in add")
        return GradedTauMatrix(self.row_weights, self.col_weights,
                               tuple(a ^ b for a, b in zip(self.rows, other.rows)))

    def compose(self, other: "GradedTauMatrix") -> "GradedTauMatrix":
        """self o other; other's codomain must match self's domain."""
        if self.col_weights != other.row_weights:
            raise StructureError("weight mismatch in compose")
        out = []
        for r in self.rows:
            acc = 0
            rr = r
            while rr:
                j = (rr & -rr).bit_length() - 1
                acc ^= other.rows[j]
                rr &= rr - 1
            out.append(acc)
        return GradedTauMatrix(self.row_weights, other.col_weights, tuple(out))

    def weight_slice(self, w: int) -> tuple[F2Matrix, list[int], list[int]]:
        """The F2 matrix of the weight-w piece of the map.

        Returns (matrix, row_indices, col_indices): basis elements with
        weight <= w occur in the slice (via their tau-shifts), and the
        incidence bits restrict unchanged.
        """
        ris = [i for i, rw in enumerate(self.row_weights) if rw <= w]
        cis = [j for j, cw in enumerate(self.col_weights) if cw <= w]
        rows = []
        for i in ris:
            r, bits = self.rows[i], 0
            for out_j, j in enumerate(cis):
                if (r >> j) & 1:
                    bits |= 1 << out_j
            rows.append(bits)
        return F2Matrix(len(ris), len(cis), tuple(rows)), ris, cis

    def col_bitmasks(self) -> list[int]:
        cols = [0] * self.ncols
        for i, r in enumerate(self.rows):
            rr = r
            while rr:
                j = (rr & -rr).bit_length() - 1
                cols[j] |= 1 << i
                rr &= rr - 1
        return cols


@dataclass(frozen=True)
class SmithResult:
    shape: TauModuleShape
    kernel: GradedTauMatrix
    pivots: tuple[tuple[int, int, int], ...]      # (row, col, exponent)
    free_rows: tuple[int, ...]                    # rows never pivoted
    torsion_rows: tuple[tuple[int, int], ...]     # (row, exponent>0)
    new_basis: tuple[int, ...] | None = None      # codomain basis change, col bitmasks
    coord_map: tuple[int, ...] | None = None      # coordinate transform, rows


def tau_smith(m: GradedTauMatrix, transforms: bool = False) -> SmithResult:
    """Graded Smith normal form of a weight-homogeneous F2[tau]-matrix.

    Returns the cokernel shape and a kernel basis.  Pivot choice is the
    globally minimal tau exponent, tie-broken by increasing column
    weight then input order, which keeps every elimination step an XOR
    and yields nondecreasing elementary divisors.

    With transforms=True the result also carries the codomain basis
    change (columns of ``new_basis``, expressed in the original basis)
    and the coordinate transform ``coord_map`` such that new coordinates
    are coord_map applied to old ones; saturated quotient construction
    uses both.
    """
    nr, nc = m.nrows, m.ncols
    rows = list(m.rows)
    rw, cw = m.row_weights, m.col_weights
    active_rows = list(range(nr))
    col_mask = (1 << nc) - 1
    ucols = [1 << j for j in range(nc)]
    pcols = [1 << i for i in range(nr)] if transforms else None
    erows = [1 << i for i in range(nr)] if transforms else None
    pivots: list[tuple[int, int, int]] = []

    while True:
        best = None
        for i in active_rows:
            r = rows[i] & col_mask
            while r:
                j = (r & -r).bit_length() - 1
                key = (cw[j] - rw[i], cw[j], j, i)
                if best is None or key < best:
                    best = key
                r &= r - 1
        if best is None:
            break
        d, _, j, i = best
        # Clear column j with row operations; exponents >= d keeps them valid.
        for i2 in active_rows:
            if i2 != i and (rows[i2] >> j) & 1:
                rows[i2] ^= rows[i]
                if transforms:
                    pcols[i] ^= pcols[i2]
                    erows[i2] ^= erows[i]
        # Clear row i with column operations against the pivot column.
        rr = rows[i] & col_mask & ~(1 << j)
        while rr:
            j2 = (rr & -rr).bit_length() - 1
            ucols[j2] ^= ucols[j]
            rows[i] ^= 1 << j2
            rr &= rr - 1
        pivots.append((i, j, d))
        active_rows.remove(i)
        col_mask &= ~(1 << j)

    active_cols = [j for j in range(nc) if (col_mask >> j) & 1]
    kernel_cols = [ucols[j] for j in active_cols]
    kernel_rows = [0] * nc
    for out_j, colbits in enumerate(kernel_cols):
        cb = colbits
        while cb:
            r = (cb & -cb).bit_length() - 1
            kernel_rows[r] |= 1 << out_j
            cb &= cb - 1
    kernel = GradedTauMatrix(
        row_weights=m.col_weights,
        col_weights=tuple(cw[j] for j in active_cols),
        rows=tuple(kernel_rows),
    )
    free_rows = tuple(sorted(set(range(nr)) - {i for i, _, _ in pivots}))
    torsion_rows = tuple(sorted((i, d) for i, _, d in pivots if d > 0))
    shape = TauModuleShape(free_rank=len(free_rows),
                           torsion=tuple(d for _, d in torsion_rows))
    return SmithResult(
        shape=shape,
        kernel=kernel,
        pivots=tuple(pivots),
        free_rows=free_rows,
        torsion_rows=torsion_rows,
        new_basis=tuple(pcols) if transforms else None,
        coord_map=tuple(erows) if transforms else None,
    )


def m2_solve(kernel: GradedTauMatrix, image: GradedTauMatrix) -> GradedTauMatrix:
    """Solve kernel @ X = image for X over F2[tau].

    The kernel columns must be F2[tau]-independent and the image columns
    must lie in their span (both hold for homology computations, where
    image is contained in an exact kernel).  Coefficients of X are again
    forced monomials, so the solve reduces to F2 systems per column.
    """
    if kernel.row_weights != image.row_weights:
        raise StructureError("ambient mismatch in m2_solve")
    kcols = kernel.col_bitmasks()
    kw = kernel.col_weights
    xrows = [0] * kernel.ncols
    for c in range(image.ncols):
        wj = image.col_weights[c]
        usable = [a for a in range(kernel.ncols) if kw[a] <= wj]
        target = image.col_bitmasks()[c]
        combo = solve_f2([kcols[a] for a in usable], target)
        if combo is None:
            raise StructureError("image column not in kernel span")
        cb = combo
        while cb:
            pos = (cb & -cb).bit_length() - 1
            xrows[usable[pos]] |= 1 << c
            cb &= cb - 1
    return GradedTauMatrix(row_weights=kw, col_weights=image.col_weights,
                           rows=tuple(xrows))


@dataclass(frozen=True)
class M2Homology:
    """ker(outgoing)/im(incoming) of a two-step F2[tau] complex."""

    shape: TauModuleShape
    free_weights: tuple[int, ...]
    torsion_weights: tuple[tuple[int, int], ...]  # (weight, exponent)

    def is_zero(self) -> bool:
        return self.shape.is_zero()

    def f2_dim_at_weight(self, w: int) -> int:
        """F2 dimension of the weight-w slice (tau raises weight by 1)."""
        dim = sum(1 for fw in self.free_weights if fw <= w)
        dim += sum(1 for tw, d in self.torsion_weights if tw <= w < tw + d)
        return dim


def m2_homology(incoming: GradedTauMatrix, outgoing: GradedTauMatrix) -> M2Homology:
    """Homology at the middle of X --incoming--> Y --outgoing--> Z."""
    if incoming.row_weights != outgoing.col_weights:
        raise StructureError("middle term mismatch in m2_homology")
    if not outgoing.compose(incoming).is_zero():
        raise StructureError("not a complex: outgoing o incoming != 0")
    ker = tau_smith(outgoing).kernel
    x = m2_solve(ker, incoming)
    res = tau_smith(x)
    free_w = tuple(sorted(ker.col_weights[i] for i in res.free_rows))
    tors_w = tuple(sorted((ker.col_weights[i], d) for i, d in res.torsion_rows))
    return M2Homology(shape=TauModuleShape(res.shape.free_rank, res.shape.torsion),
                      free_weights=free_w, torsion_weights=tors_w)
