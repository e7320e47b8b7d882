"""Exact rational linear algebra kernel.

Everything the solver computes flows through this module: scalars are
`fractions.Fraction` values (always in lowest terms, positive denominator),
vectors are lists of Fractions and matrices are lists of rows.  Norms are
handled exclusively as squares, so no square roots and no floats appear
anywhere on the solving path.

The weighted geometry is defined by a diagonal matrix D with entries
d_ii = 4/u_i^2 for a vector u of positive upper bounds; `DContext` caches the
diagonal of D and of its inverse.  `project_affine` computes exact
minimum-D-norm projections onto affine subspaces, and `row_reduce` brings an
input system to full row rank, producing a rational inconsistency certificate
when the system has no solution at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

Scalar = Fraction
Vector = list[Fraction]
Matrix = list[list[Fraction]]

ZERO = Fraction(0)
ONE = Fraction(1)


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SolverError):
    pass


class SingularSystem(SolverError):
    """A linear system expected to be nonsingular was not (caller bug)."""


class InternalInvariantError(SolverError):
    """An exact runtime guarantee failed; indicates a defect, not bad input."""


class BitSizeExceeded(SolverError):
    """A state rational outgrew the configured bit-length cap."""


class IterationCapExceeded(SolverError):
    """A loop ran past its proven iteration bound; indicates a defect."""


def frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def frac_vec(xs) -> Vector:
    return [frac(x) for x in xs]


def frac_mat(rows) -> Matrix:
    return [frac_vec(r) for r in rows]


def dot(x: Vector, y: Vector) -> Fraction:
    if len(x) != len(y):
        raise DimensionMismatch(f"dot: {len(x)} vs {len(y)}")
    return sum((a * b for a, b in zip(x, y)), ZERO)


def mat_vec(a: Matrix, x: Vector) -> Vector:
    return [dot(row, x) for row in a]


def mat_t_vec(a: Matrix, y: Vector) -> Vector:
    """Transpose product A^T y for A given as a list of rows."""
    if len(a) != len(y):
        raise DimensionMismatch(f"mat_t_vec: {len(a)} rows vs {len(y)}")
    n = len(a[0]) if a else 0
    out = [ZERO] * n
    for row, c in zip(a, y):
        if c == 0:
            continue
        for j, v in enumerate(row):
            if v != 0:
                out[j] += v * c
    return out


def vec_sub(x: Vector, y: Vector) -> Vector:
    return [a - b for a, b in zip(x, y)]


def vec_add(x: Vector, y: Vector) -> Vector:
    return [a + b for a, b in zip(x, y)]


def vec_scale(x: Vector, c: Fraction) -> Vector:
    return [a * c for a in x]


def isqrt_ceil(k: int) -> int:
    """Smallest integer c with c*c >= k, for k >= 0."""
    if k < 0:
        raise ValueError("isqrt_ceil of negative value")
    c = math.isqrt(k)
    return c if c * c == k else c + 1


def ceil_sqrt_fraction(x: Fraction) -> int:
    """Smallest integer c with c*c >= x, for a nonnegative rational x."""
    if x < 0:
        raise ValueError("ceil_sqrt_fraction of negative value")
    if x == 0:
        return 0
    p, q = x.numerator, x.denominator
    c = math.isqrt(p // q)
    while c * c * q < p:
        c += 1
    return c


def rational_bits(x: Fraction) -> int:
    return max(x.numerator.bit_length(), x.denominator.bit_length())


def max_rational_bits(values) -> int:
    best = 0
    for v in values:
        b = rational_bits(v)
        if b > best:
            best = b
    return best


@dataclass(frozen=True)
class DContext:
    """Diagonal weighted geometry induced by a positive bound vector u.

    d[i] = 4/u_i^2 and d_inv[i] = u_i^2/4, so the box {0 <= x <= u} sits
    inside the D-ball of squared radius 4*n_active around the origin.
    """

    u: tuple[Fraction, ...]
    d: tuple[Fraction, ...]
    d_inv: tuple[Fraction, ...]
    n_active: int


def d_context(u) -> DContext:
    uu = tuple(frac(x) for x in u)
    if any(x <= 0 for x in uu):
        raise ValueError("all upper bounds must be positive")
    d = tuple(Fraction(4) / (x * x) for x in uu)
    d_inv = tuple((x * x) / 4 for x in uu)
    return DContext(u=uu, d=d, d_inv=d_inv, n_active=len(uu))


def d_inner(x: Vector, y: Vector, ctx: DContext) -> Fraction:
    if len(x) != ctx.n_active or len(y) != ctx.n_active:
        raise DimensionMismatch(
            f"d_inner: got {len(x)} and {len(y)}, context has {ctx.n_active}"
        )
    total = ZERO
    for di, a, b in zip(ctx.d, x, y):
        if a != 0 and b != 0:
            total += di * a * b
    return total


def d_norm_sq(x: Vector, ctx: DContext) -> Fraction:
    return d_inner(x, x, ctx)


@dataclass(frozen=True)
class AffineSystem:
    """An affine subspace {x : Cx = rhs} with C of full row rank."""

    c: Matrix
    rhs: Vector


@dataclass(frozen=True)
class Reduced:
    """Full-row-rank restatement of an input system.

    `rows` are indices of a maximal independent subset of the original rows
    (scanned top to bottom, a row kept iff independent of the rows already
    kept), and `a`, `b` are those original rows verbatim.  The solution set
    is exactly that of the input system.
    """

    rows: list[int]
    a: Matrix
    b: Vector


@dataclass(frozen=True)
class Inconsistent:
    """Certificate that Cx = rhs has no solution: y^T C = 0, y^T rhs != 0."""

    y: Vector


def row_reduce(a, b) -> Reduced | Inconsistent:
    m = len(a)
    if len(b) != m:
        raise DimensionMismatch(f"row_reduce: {m} rows vs {len(b)} rhs entries")
    work = frac_mat(a) if m else []
    rhs = frac_vec(b)
    combo = [[ONE if i == j else ZERO for j in range(m)] for i in range(m)]
    kept: list[tuple[int, int]] = []  # (work row index, pivot column)
    selected: list[int] = []
    for r in range(m):
        row = work[r]
        for k, pc in kept:
            f = row[pc]
            if f == 0:
                continue
            piv = work[k]
            f = f / piv[pc]
            for j in range(len(row)):
                if piv[j] != 0:
                    row[j] -= f * piv[j]
            rhs[r] -= f * rhs[k]
            ck = combo[k]
            cr = combo[r]
            for j in range(m):
                if ck[j] != 0:
                    cr[j] -= f * ck[j]
        pivot_col = next((j for j, v in enumerate(row) if v != 0), None)
        if pivot_col is None:
            if rhs[r] != 0:
                return Inconsistent(y=combo[r])
        else:
            kept.append((r, pivot_col))
            selected.append(r)
    return Reduced(
        rows=selected,
        a=[frac_vec(a[i]) for i in selected],
        b=[frac(b[i]) for i in selected],
    )


def gauss_solve(m: Matrix, rhs: Vector) -> Vector:
    """Solve the square system m x = rhs exactly.

    Elimination takes the first nonzero pivot in each column, so the result
    is deterministic.  Raises SingularSystem if the matrix is singular.
    """
    k = len(m)
    if any(len(row) != k for row in m) or len(rhs) != k:
        raise DimensionMismatch("gauss_solve requires a square system")
    a = [list(row) for row in m]
    b = list(rhs)
    for col in range(k):
        piv = next((r for r in range(col, k) if a[r][col] != 0), None)
        if piv is None:
            raise SingularSystem("singular system in gauss_solve")
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            b[col], b[piv] = b[piv], b[col]
        pval = a[col][col]
        for r in range(col + 1, k):
            f = a[r][col]
            if f == 0:
                continue
            f = f / pval
            for j in range(col, k):
                if a[col][j] != 0:
                    a[r][j] -= f * a[col][j]
            b[r] -= f * b[col]
    x = [ZERO] * k
    for r in range(k - 1, -1, -1):
        s = b[r]
        for j in range(r + 1, k):
            if a[r][j] != 0:
                s -= a[r][j] * x[j]
        x[r] = s / a[r][r]
    return x


def project_affine(sys: AffineSystem, xbar: Vector, ctx: DContext) -> tuple[Vector, Vector]:
    """Minimum-D-distance projection of xbar onto {x : Cx = rhs}.

    Returns (y, lam) with y = xbar + D^{-1} C^T lam and
    lam = (C D^{-1} C^T)^{-1} (rhs - C xbar).  The exact identity
    ||y - xbar||_D^2 = (rhs - C xbar)^T lam is re-checked on every call.
    """
    c, rhs = sys.c, sys.rhs
    k = len(c)
    n = ctx.n_active
    if len(xbar) != n:
        raise DimensionMismatch(f"project_affine: point has {len(xbar)} coords")
    if k == 0:
        return list(xbar), []
    if any(len(row) != n for row in c):
        raise DimensionMismatch("project_affine: row width mismatch")
    # Gram matrix C D^{-1} C^T, singular exactly when C is row deficient.
    gram = [[ZERO] * k for _ in range(k)]
    for r in range(k):
        cr = c[r]
        for s in range(r, k):
            cs = c[s]
            total = ZERO
            for t in range(n):
                if cr[t] != 0 and cs[t] != 0:
                    total += ctx.d_inv[t] * cr[t] * cs[t]
            gram[r][s] = total
            gram[s][r] = total
    resid = [rhs[r] - dot(c[r], xbar) for r in range(k)]
    lam = gauss_solve(gram, resid)
    y = list(xbar)
    for r in range(k):
        lr = lam[r]
        if lr == 0:
            continue
        cr = c[r]
        for t in range(n):
            if cr[t] != 0:
                y[t] += ctx.d_inv[t] * cr[t] * lr
    if d_norm_sq(vec_sub(y, xbar), ctx) != dot(resid, lam):
        raise InternalInvariantError("projection distance identity failed")
    return y, lam


def signed_gap_to_hyperplane(
    alpha_scaled: Vector,
    norm_sq: Fraction,
    beta_scaled: Fraction,
    xbar: Vector,
    ctx: DContext,
) -> tuple[Fraction, int]:
    """Squared D-distance from xbar to the hyperplane <p, x>_D = beta.

    `alpha_scaled` is the (not necessarily unit) normal p, `norm_sq` its
    squared D-norm.  Returns (squared distance, sign of beta - <p, xbar>_D);
    both are invariant under positive rescaling of (p, beta, norm_sq).
    """
    if norm_sq <= 0:
        raise ValueError("hyperplane normal must have positive squared norm")
    gap = beta_scaled - d_inner(alpha_scaled, xbar, ctx)
    sign = 0 if gap == 0 else (1 if gap > 0 else -1)
    return gap * gap / norm_sq, sign
