"""Inner projection loop ("bubble" procedure) over a full-row-rank system.

Given Ax = b with A of full row rank and positive upper bounds u, the loop
maintains a point z in the affine set of Ax = b whose weighted norm grows by
a guaranteed exact amount each iteration, until one of three things happens:
z becomes nonnegative (a feasible point), the working constraint set empties
(a Farkas certificate that {Ax = b, x >= u/(2n)} is empty), or ||z||_D^2
exceeds 4n (a separating pair usable for bound shrinking).

Everything is phrased in a purely rational basis.  Unit normals would be
irrational, so each coordinate hyperplane is cached as a scaled normal p_j
lying in the null space of A together with its squared norm, its row-space
multipliers and a scaled offset; the iterate carries the nonnegative
combination rho with z - r0 = sum_j rho_j p_j.  Every guarantee (progress,
multiplier signs, decomposition, coefficient growth, pivot history) is
asserted exactly at runtime and a violation raises InternalInvariantError:
these are defects, never data conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .certificates import check_farkas, check_separator
from .geometry import (
    ZERO,
    AffineSystem,
    DContext,
    BitSizeExceeded,
    InternalInvariantError,
    IterationCapExceeded,
    Matrix,
    SingularSystem,
    Vector,
    ceil_sqrt_fraction,
    d_context,
    d_inner,
    d_norm_sq,
    dot,
    frac_mat,
    frac_vec,
    mat_t_vec,
    mat_vec,
    max_rational_bits,
    project_affine,
    vec_sub,
)

DEFAULT_BIT_CAP = 1 << 16


@dataclass(frozen=True)
class Plane:
    """Cached data for the coordinate constraint x_j >= ell_j inside <Ax=b>.

    p lies in the null space of A and satisfies D p = A^T chat + e_j, so for
    every x with Ax = b one has <p, x>_D = b.chat + x_j.  norm_sq = ||p||_D^2
    equals p_j.  `constant` marks p = 0, i.e. x_j takes a single value on the
    whole affine set.
    """

    p: tuple[Fraction, ...]
    norm_sq: Fraction
    chat: tuple[Fraction, ...]
    beta_hat: Fraction
    constant: bool


@dataclass(frozen=True)
class Feasible:
    x: Vector


@dataclass(frozen=True)
class Separator:
    """Pair (v, w) with Dz = A^T v + w, ||z||_D^2 = b.v + ell.w, w >= 0, w != 0."""

    v: Vector
    w: Vector


@dataclass(frozen=True)
class FarkasEmptyK:
    """Pair (v, w) with A^T v + w = 0, w >= 0 and b.v + ell.w > 0."""

    v: Vector
    w: Vector


BubbleOutcome = Feasible | Separator | FarkasEmptyK


@dataclass
class BubbleState:
    a: Matrix
    b: Vector
    ctx: DContext
    ell: Vector
    planes: list[Plane]
    r0: Vector
    vbar0: Vector
    r0_norm_sq: Fraction
    z: Vector
    rho: Vector
    gap_sq: Fraction
    iters: int


@dataclass
class BubbleRunStats:
    iterations: int = 0
    max_bitsize: int = 0
    rounding_fallbacks: int = 0
    # exact minima over the run of (gain * n^2); None until the first pivot
    min_step_gain_scaled: Fraction | None = None
    min_net_gain_scaled: Fraction | None = None


def _require(cond: bool, msg: str, **context) -> None:
    if not cond:
        detail = "; ".join(f"{k}={v}" for k, v in context.items())
        raise InternalInvariantError(f"{msg}" + (f" [{detail}]" if detail else ""))


def _beta_less(bj: Fraction, nj: Fraction, bh: Fraction, nh: Fraction) -> bool:
    """Compare beta_j < beta_h where beta = beta_hat/sqrt(norm_sq), exactly.

    Signs first, then cross-multiplied squares; norms are never extracted.
    """
    sj = 0 if bj == 0 else (1 if bj > 0 else -1)
    sh = 0 if bh == 0 else (1 if bh > 0 else -1)
    if sj != sh:
        return sj < sh
    if sj == 0:
        return False
    lhs = bj * bj * nh
    rhs = bh * bh * nj
    return lhs < rhs if sj > 0 else lhs > rhs


def _build_planes(a: Matrix, b: Vector, ctx: DContext, ell: Vector, r0: Vector) -> list[Plane]:
    n = ctx.n_active
    null_system = AffineSystem(c=a, rhs=[ZERO] * len(a))
    planes = []
    for j in range(n):
        start = [ZERO] * n
        start[j] = ctx.d_inv[j]
        p, chat = project_affine(null_system, start, ctx)
        nsq = d_norm_sq(p, ctx)
        _require(p[j] == nsq, "plane norm identity failed", j=j)
        _require(all(v == 0 for v in mat_vec(a, p)), "plane not in null space", j=j)
        # D p - e_j must equal A^T chat, exactly.
        lifted = mat_t_vec(a, chat) if a else [ZERO] * n
        for t in range(n):
            expect = lifted[t] + (1 if t == j else 0)
            _require(ctx.d[t] * p[t] == expect, "plane row-space residual", j=j, t=t)
        beta_hat = dot(b, chat) + ell[j]
        _require(beta_hat == ell[j] - r0[j], "plane offset identity failed", j=j)
        planes.append(
            Plane(
                p=tuple(p),
                norm_sq=nsq,
                chat=tuple(chat),
                beta_hat=beta_hat,
                constant=(nsq == 0),
            )
        )
    return planes


def _constant_farkas(state_planes: list[Plane], j: int) -> FarkasEmptyK:
    # x_j is a single value below ell_j on the affine set: theta = e_j works.
    pl = state_planes[j]
    w = [ZERO] * len(state_planes)
    w[j] = Fraction(1)
    return FarkasEmptyK(v=list(pl.chat), w=w)


def init_bubble(a, b, u) -> BubbleState | Feasible | FarkasEmptyK:
    """Set up the iterate, or finish immediately.

    Projects the origin onto <Ax=b> to get r0.  If r0 >= 0 it is feasible.
    If some coordinate is constant on the affine set and sits below its
    ell threshold, the shifted region is empty and a Farkas pair comes out
    directly.  Otherwise the first pivot goes to the coordinate hyperplane
    of largest offset rather than an arbitrary violated one, which is what
    keeps the later pivot-history bound valid.
    """
    am = frac_mat(a)
    bv = frac_vec(b)
    ctx = d_context(u)
    n = ctx.n_active
    ell = [ctx.u[j] / (2 * n) for j in range(n)]
    try:
        r0, vbar0 = project_affine(AffineSystem(c=am, rhs=bv), [ZERO] * n, ctx)
    except SingularSystem as exc:
        raise ValueError("matrix must have full row rank (row_reduce first)") from exc
    if all(x >= 0 for x in r0):
        return Feasible(x=r0)
    r0_norm_sq = d_norm_sq(r0, ctx)
    _require(r0_norm_sq == dot(bv, vbar0), "r0 norm identity failed")
    planes = _build_planes(am, bv, ctx, ell, r0)
    for j in range(n):
        if planes[j].constant and r0[j] < ell[j]:
            return _constant_farkas(planes, j)
    t = None
    for j in range(n):
        pl = planes[j]
        if pl.constant or pl.beta_hat <= 0:
            continue
        if t is None or _beta_less(
            planes[t].beta_hat, planes[t].norm_sq, pl.beta_hat, pl.norm_sq
        ):
            t = j
    _require(t is not None, "no positive-offset pivot despite r0 infeasible")
    pt = planes[t]
    coeff = pt.beta_hat / pt.norm_sq
    z = [r0[k] + coeff * pt.p[k] for k in range(n)]
    rho = [ZERO] * n
    rho[t] = coeff
    gap_sq = pt.beta_hat * pt.beta_hat / pt.norm_sq
    _require(z[t] == ell[t], "first pivot missed its hyperplane", t=t)
    state = BubbleState(
        a=am,
        b=bv,
        ctx=ctx,
        ell=ell,
        planes=planes,
        r0=r0,
        vbar0=vbar0,
        r0_norm_sq=r0_norm_sq,
        z=z,
        rho=rho,
        gap_sq=gap_sq,
        iters=1,
    )
    _check_state(state)
    return state


def _check_state(state: BubbleState) -> None:
    """Exact consistency of the iterate: membership, decomposition, norms."""
    n = state.ctx.n_active
    _require(mat_vec(state.a, state.z) == state.b, "iterate left the affine set")
    _require(all(r >= 0 for r in state.rho), "negative combination coefficient")
    g = vec_sub(state.z, state.r0)
    recomposed = [ZERO] * n
    for j, rj in enumerate(state.rho):
        if rj == 0:
            continue
        pj = state.planes[j].p
        for k in range(n):
            recomposed[k] += rj * pj[k]
    _require(recomposed == g, "decomposition z - r0 = sum rho_j p_j failed")
    _require(d_norm_sq(g, state.ctx) == state.gap_sq, "cached gap_sq is stale")
    beta_sum = sum(
        (rj * state.planes[j].beta_hat for j, rj in enumerate(state.rho) if rj != 0),
        ZERO,
    )
    _require(beta_sum == state.gap_sq, "offset identity gap_sq = rho . beta_hat failed")


def choose_violated_index(state: BubbleState) -> int:
    """Most violated coordinate: argmin z_i/u_i over z_i < 0, lowest index on ties."""
    best = None
    best_ratio = None
    for i, zi in enumerate(state.z):
        if zi >= 0:
            continue
        ratio = zi / state.ctx.u[i]
        if best is None or ratio < best_ratio:
            best, best_ratio = i, ratio
    if best is None:
        raise ValueError("no violated coordinate; iterate is feasible")
    return best


def bubble_step(state: BubbleState, i: int) -> BubbleState | FarkasEmptyK:
    """One pivot on coordinate i (z_i < 0).

    If the constraint set K for this pivot is empty, which happens exactly
    when p_i is a negative multiple of z - r0 (or x_i is constant), returns
    the Farkas pair.  Otherwise projects r0 onto the three-constraint system
    and rebuilds the nonnegative decomposition, asserting the exact progress
    guarantee ||z'||^2 > ||z||^2 + 1/n^2.
    """
    n = state.ctx.n_active
    _require(state.z[i] < 0, "pivot coordinate is not violated", i=i)
    pl = state.planes[i]
    if pl.constant:
        out = _constant_farkas(state.planes, i)
        return out
    g = vec_sub(state.z, state.r0)
    k0 = next(k for k, v in enumerate(g) if v != 0)
    tau = -pl.p[k0] / g[k0]
    if all(pl.p[k] == -tau * g[k] for k in range(n)):
        # The two halfspace normals are parallel inside the affine set.
        _require(tau > 0, "positively parallel pivot reached", i=i)
        theta = [tau * r for r in state.rho]
        theta[i] += 1
        v = [ZERO] * len(state.b)
        for j, tj in enumerate(theta):
            if tj == 0:
                continue
            cj = state.planes[j].chat
            for r in range(len(v)):
                v[r] += tj * cj[r]
        lifted = mat_t_vec(state.a, v) if state.a else [ZERO] * n
        _require(
            all(lifted[t] + theta[t] == 0 for t in range(n)),
            "Farkas row-space identity failed",
        )
        value = dot(state.b, v) + dot(state.ell, theta)
        _require(value == state.ell[i] - state.z[i], "Farkas gap identity failed")
        _require(value > 0, "Farkas value not positive")
        return FarkasEmptyK(v=v, w=theta)

    # Project r0 onto { Ax=b, <z-r0, x>_D = <z-r0, z>_D, x_i = ell_i }.
    grow = [state.ctx.d[k] * g[k] for k in range(n)]
    ei = [ZERO] * n
    ei[i] = Fraction(1)
    c3 = state.a + [grow, ei]
    rhs3 = state.b + [state.gap_sq, state.ell[i]]
    try:
        z_new, _ = project_affine(AffineSystem(c=c3, rhs=rhs3), state.r0, state.ctx)
    except SingularSystem as exc:
        raise InternalInvariantError(
            f"three-constraint projection singular at pivot {i}"
        ) from exc
    gn = vec_sub(z_new, state.r0)
    ip_pg = d_inner(pl.p, g, state.ctx)
    ip_p_gn = d_inner(pl.p, gn, state.ctx)
    ip_g_gn = d_inner(g, gn, state.ctx)
    _require(ip_p_gn == pl.beta_hat, "pivot hyperplane not tight after projection")
    _require(ip_g_gn == state.gap_sq, "previous cut not tight after projection")
    det = pl.norm_sq * state.gap_sq - ip_pg * ip_pg
    _require(det > 0, "Gram determinant not positive for independent pivot")
    mu1 = (ip_p_gn * state.gap_sq - ip_pg * ip_g_gn) / det
    mu2 = (pl.norm_sq * ip_g_gn - ip_pg * ip_p_gn) / det
    _require(mu1 >= 0 and mu2 >= 0, "projection multipliers negative", mu1=mu1, mu2=mu2)
    _require(
        all(gn[k] == mu1 * pl.p[k] + mu2 * g[k] for k in range(n)),
        "two-term decomposition of the new iterate failed",
    )
    rho_new = [mu2 * r for r in state.rho]
    rho_new[i] += mu1
    gap_new = d_norm_sq(gn, state.ctx)
    n_sq = Fraction(n * n)
    _require(
        gap_new > state.gap_sq + 1 / n_sq,
        "progress guarantee violated",
        gap_before=state.gap_sq,
        gap_after=gap_new,
    )
    if state.r0_norm_sq + gap_new <= 4 * n:
        # Coefficient growth bound, in squared rational form; only claimed
        # while the iterate stays inside the working ball.
        bound_factor = Fraction(64 * n**6)
        for j in range(n):
            lhs = rho_new[j] * rho_new[j] * state.planes[j].norm_sq
            rhs = bound_factor * (
                2 * state.rho[j] * state.rho[j] * state.planes[j].norm_sq
                + 2 * state.gap_sq
            )
            _require(lhs <= rhs, "coefficient growth bound violated", j=j)
    for j in range(n):
        if rho_new[j] != 0:
            bh = state.planes[j].beta_hat
            _require(
                bh * bh <= gap_new * state.planes[j].norm_sq,
                "pivot-history bound violated",
                j=j,
            )
    new_state = replace(
        state, z=z_new, rho=rho_new, gap_sq=gap_new, iters=state.iters + 1
    )
    _check_state(new_state)
    return new_state


def snap_to_grid(x: Fraction, denominator: int) -> Fraction:
    """Nearest multiple of 1/denominator to x; exact halves round up."""
    k = (x * denominator + Fraction(1, 2)).__floor__()
    return Fraction(k, denominator)


def round_coefficients(state: BubbleState) -> tuple[BubbleState, bool]:
    """Snap the combination coefficients to a coarse grid and renormalize.

    Each rho_j moves to the nearest multiple of 1/(16 n^3 * n * ceil(sqrt(n_j))),
    the combination is rescaled so the cut stays tight at the new iterate, and
    the result is adopted only if it provably gives up at most 1/(2n^2) of
    squared norm, keeps the offset positive and preserves the pivot-history
    bound; otherwise the unrounded state is kept for this iteration (second
    return value False).  Either way all coefficients stay nonnegative, so
    validity of the cut for the shifted region is untouched.
    """
    n = state.ctx.n_active
    _require(state.gap_sq * n * n >= 1, "rounding called with tiny gap")
    q = 16 * n**3
    rho_r = list(state.rho)
    changed = False
    for j, rj in enumerate(state.rho):
        if rj == 0:
            continue
        cj = ceil_sqrt_fraction(state.planes[j].norm_sq)
        snapped = snap_to_grid(rj, q * n * cj)
        if snapped != rj:
            changed = True
        rho_r[j] = snapped
    if not changed:
        return state, True
    gamma = [ZERO] * n
    for j, rj in enumerate(rho_r):
        if rj == 0:
            continue
        pj = state.planes[j].p
        for k in range(n):
            gamma[k] += rj * pj[k]
    gamma_sq = d_norm_sq(gamma, state.ctx)
    if gamma_sq == 0:
        return state, False
    delta = sum(
        (rj * state.planes[j].beta_hat for j, rj in enumerate(rho_r) if rj != 0),
        ZERO,
    )
    if delta <= 0:
        return state, False
    scale = delta / gamma_sq
    gap_new = delta * scale
    if state.gap_sq - gap_new > Fraction(1, 2 * n * n):
        return state, False
    for j, rj in enumerate(rho_r):
        if rj != 0:
            bh = state.planes[j].beta_hat
            if bh * bh > gap_new * state.planes[j].norm_sq:
                return state, False
    z_new = [state.r0[k] + scale * gamma[k] for k in range(n)]
    rho_new = [rj * scale for rj in rho_r]
    new_state = replace(state, z=z_new, rho=rho_new, gap_sq=gap_new)
    _check_state(new_state)
    return new_state, True


def _assemble_separator(state: BubbleState) -> Separator:
    m = len(state.b)
    n = state.ctx.n_active
    v = list(state.vbar0)
    for j, rj in enumerate(state.rho):
        if rj == 0:
            continue
        cj = state.planes[j].chat
        for r in range(m):
            v[r] += rj * cj[r]
    w = list(state.rho)
    _require(any(x != 0 for x in w), "separator with zero w")
    lifted = mat_t_vec(state.a, v) if state.a else [ZERO] * n
    norm_sq = state.r0_norm_sq + state.gap_sq
    _require(
        all(state.ctx.d[t] * state.z[t] == lifted[t] + w[t] for t in range(n)),
        "separator gradient identity failed",
    )
    _require(
        norm_sq == dot(state.b, v) + dot(state.ell, w),
        "separator offset identity failed",
    )
    return Separator(v=v, w=w)


def run_bubble(
    a,
    b,
    u,
    *,
    rounding: bool = True,
    bit_cap: int = DEFAULT_BIT_CAP,
    on_state=None,
) -> tuple[BubbleOutcome, BubbleRunStats]:
    """Run the inner loop to one of its three outcomes.

    Emitted certificates are re-validated through the independent checkers
    before being returned.  `on_state` (if given) is called with the state
    after the initial pivot and after every subsequent iteration.
    """
    stats = BubbleRunStats()
    ctx_n = len(u)
    state = init_bubble(a, b, u)
    if isinstance(state, Feasible):
        return state, stats
    if isinstance(state, FarkasEmptyK):
        _validate_farkas(a, b, u, state)
        return state, stats
    cap = 8 * ctx_n**3 + 1
    stats.iterations = state.iters
    _track_setup_bits(state, stats, bit_cap)
    _track_bits(state, stats, bit_cap)
    if on_state is not None:
        on_state(state)
    n = state.ctx.n_active
    while True:
        if state.r0_norm_sq + state.gap_sq > 4 * n:
            sep = _assemble_separator(state)
            if not check_separator(state.a, state.b, state.ctx.u, n, sep.v, sep.w):
                raise InternalInvariantError("assembled separator failed its checker")
            return sep, stats
        if all(zk >= 0 for zk in state.z):
            x = list(state.z)
            return Feasible(x=x), stats
        i = choose_violated_index(state)
        gap_before = state.gap_sq
        result = bubble_step(state, i)
        stats.iterations += 1
        if stats.iterations > cap:
            raise IterationCapExceeded(
                f"inner loop exceeded {cap} iterations (n={n})"
            )
        if isinstance(result, FarkasEmptyK):
            _validate_farkas(a, b, u, result)
            return result, stats
        state = result
        step_gain = (state.gap_sq - gap_before) * n * n
        if stats.min_step_gain_scaled is None or step_gain < stats.min_step_gain_scaled:
            stats.min_step_gain_scaled = step_gain
        if rounding:
            state, ok = round_coefficients(state)
            if not ok:
                stats.rounding_fallbacks += 1
        net_gain = (state.gap_sq - gap_before) * n * n
        if stats.min_net_gain_scaled is None or net_gain < stats.min_net_gain_scaled:
            stats.min_net_gain_scaled = net_gain
        _track_bits(state, stats, bit_cap)
        if on_state is not None:
            on_state(state)


def _validate_farkas(a, b, u, cert: FarkasEmptyK) -> None:
    n = len(u)
    ell = [Fraction(x) / (2 * n) for x in map(Fraction, u)]
    if not check_farkas(a, b, ell, cert.v, cert.w):
        raise InternalInvariantError("assembled Farkas pair failed its checker")


def _track_setup_bits(state: BubbleState, stats: BubbleRunStats, bit_cap: int) -> None:
    """One-time scan of the per-run constants (r0 and the plane cache)."""
    bits = max_rational_bits(state.r0)
    bits = max(bits, max_rational_bits(state.vbar0))
    for pl in state.planes:
        bits = max(bits, max_rational_bits(pl.p))
        bits = max(bits, max_rational_bits(pl.chat))
        bits = max(bits, max_rational_bits((pl.beta_hat, pl.norm_sq)))
    if bits > stats.max_bitsize:
        stats.max_bitsize = bits
    if bits > bit_cap:
        raise BitSizeExceeded(
            f"setup rational reached {bits} bits (cap {bit_cap})"
        )


def _track_bits(state: BubbleState, stats: BubbleRunStats, bit_cap: int) -> None:
    bits = max_rational_bits(state.z)
    bits = max(bits, max_rational_bits(state.rho))
    bits = max(bits, max_rational_bits((state.gap_sq,)))
    if bits > stats.max_bitsize:
        stats.max_bitsize = bits
    if bits > bit_cap:
        raise BitSizeExceeded(
            f"state rational reached {bits} bits (cap {bit_cap})"
        )
