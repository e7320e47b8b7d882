"""Outer feasibility loop: bound maintenance, fixing, and the verdict.

The driver owns the exact integer bound delta_hat (ceiling of the square
root of the product of the largest squared column norms of (A, b)), which
dominates every entry of every basic feasible solution.  Each round of the
inner loop either hands back a feasible point or a separating pair (v, w);
the pair shrinks the upper-bound vector u so that at least one coordinate
halves, bounds are then relaxed upward onto a coarse grid to keep encoding
sizes small, and any coordinate forced below 1/delta_hat is fixed to zero
and its column removed.  The run ends with a feasible point or with a
reduced system that has no nonnegative solution; in the latter case the
ordered audit of updates and fixings is the infeasibility proof object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .bubble import FarkasEmptyK, Feasible, run_bubble
from .certificates import check_feasible, check_separator
from .geometry import (
    ZERO,
    Inconsistent,
    InternalInvariantError,
    IterationCapExceeded,
    Vector,
    frac,
    frac_vec,
    gauss_solve,
    isqrt_ceil,
    max_rational_bits,
    row_reduce,
)
from .instrument import Monitor, RunStats

DEFAULT_BIT_CAP = 1 << 16


@dataclass(frozen=True)
class Problem:
    """An integer feasibility instance {Ax = b, x >= 0}."""

    a: list[list[int]]
    b: list[int]

    @property
    def m(self) -> int:
        return len(self.a)

    @property
    def n(self) -> int:
        return len(self.a[0]) if self.a else 0

    def validate(self) -> None:
        if not self.a or not self.a[0]:
            raise ValueError("problem needs at least one row and one column")
        n = len(self.a[0])
        if any(len(row) != n for row in self.a):
            raise ValueError("ragged constraint matrix")
        if len(self.b) != len(self.a):
            raise ValueError("right-hand side length mismatch")
        for row in self.a:
            for x in row:
                _as_int(x)
        for x in self.b:
            _as_int(x)


def _as_int(x) -> int:
    if isinstance(x, bool):
        raise ValueError("boolean is not a matrix entry")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    raise ValueError(f"integer required, got {x!r}")


@dataclass
class ScaleState:
    """Current bound vector over the active variables, plus the fixed set."""

    active: list[int]
    u: list[Fraction]
    fixed: list[int]
    delta_sq: int
    delta_hat: int


@dataclass(frozen=True)
class AuditEntry:
    index: int
    active: list[int]
    u_before: list[Fraction]
    kind: str
    v: list[Fraction]
    w: list[Fraction]
    u_after: list[Fraction]
    fixed: list[int]


@dataclass(frozen=True)
class Terminal:
    reason: str
    active: list[int]
    y: list[Fraction] | None = None
    x_reduced: list[Fraction] | None = None


@dataclass
class AuditLog:
    m: int
    n: int
    delta_sq: int
    delta_hat: int
    entries: list[AuditEntry] = field(default_factory=list)
    terminal: Terminal | None = None


@dataclass(frozen=True)
class FeasibleVerdict:
    x: Vector


@dataclass(frozen=True)
class InfeasibleVerdict:
    audit: AuditLog


Verdict = FeasibleVerdict | InfeasibleVerdict


@dataclass
class SolveResult:
    verdict: Verdict
    stats: RunStats
    audit: AuditLog


@dataclass(frozen=True)
class UniqueSolution:
    x: Vector


@dataclass(frozen=True)
class Underdetermined:
    rows: list[int]
    a: list[list[Fraction]]
    b: list[Fraction]


def compute_delta_sq(a, b) -> int:
    """Product of the m largest squared column norms of the augmented (A, b)."""
    m = len(a)
    if m == 0:
        return 1
    n = len(a[0])
    norms = [sum(_as_int(a[r][j]) ** 2 for r in range(m)) for j in range(n)]
    norms.append(sum(_as_int(x) ** 2 for x in b))
    norms.sort(reverse=True)
    out = 1
    for v in norms[:m]:
        out *= v
    return out


def update_bounds(u, w, n_active: int) -> list[Fraction]:
    """Shrink bounds from a separating pair; one coordinate at least halves.

    With w rescaled so that sum u_i w_i = 2*n_active, the new bound is
    u'_j = min(u_j, 1/w_j) (unchanged where w_j = 0).  The halving guarantee
    at p = argmax u_j w_j is asserted exactly.
    """
    uv = frac_vec(u)
    wv = frac_vec(w)
    if len(uv) != len(wv):
        raise ValueError("bound and weight vectors differ in length")
    if any(wj < 0 for wj in wv):
        raise ValueError("negative separator weight")
    if all(wj == 0 for wj in wv):
        raise ValueError("zero separator weight vector")
    s = sum((ui * wi for ui, wi in zip(uv, wv)), ZERO)
    u_prime = []
    for ui, wi in zip(uv, wv):
        if wi == 0:
            u_prime.append(ui)
        else:
            u_prime.append(min(ui, s / (2 * n_active * wi)))
    p = max(range(len(uv)), key=lambda t: (uv[t] * wv[t], -t))
    if u_prime[p] > uv[p] / 2:
        raise InternalInvariantError("halving guarantee failed in update_bounds")
    return u_prime


def grid_ceil(x: Fraction, step: Fraction) -> Fraction:
    q, r = divmod(x.numerator * step.denominator, x.denominator * step.numerator)
    if r != 0:
        q += 1
    return q * step


def round_bounds(u_prime, n: int, delta_hat: int) -> list[Fraction]:
    """Relax each bound up to the next multiple of 1/(3 n delta_hat)."""
    step = Fraction(1, 3 * n * delta_hat)
    return [grid_ceil(frac(x), step) for x in u_prime]


def fix_variables(state: ScaleState) -> tuple[ScaleState, list[int]]:
    """Move every active variable with u_j < 1/delta_hat to the fixed set."""
    threshold = Fraction(1, state.delta_hat)
    newly = [j for j, uj in zip(state.active, state.u) if uj < threshold]
    if not newly:
        return state, []
    gone = set(newly)
    keep_active = [j for j in state.active if j not in gone]
    keep_u = [uj for j, uj in zip(state.active, state.u) if j not in gone]
    new_state = ScaleState(
        active=keep_active,
        u=keep_u,
        fixed=state.fixed + newly,
        delta_sq=state.delta_sq,
        delta_hat=state.delta_hat,
    )
    return new_state, newly


def solve_reduced(a_active, b) -> UniqueSolution | Underdetermined | Inconsistent:
    """Row-reduce the column-restricted system and classify it."""
    red = row_reduce(a_active, b)
    if isinstance(red, Inconsistent):
        return red
    ncols = len(a_active[0]) if a_active else 0
    if len(red.rows) == ncols:
        x = gauss_solve(red.a, red.b)
        return UniqueSolution(x=x)
    return Underdetermined(rows=red.rows, a=red.a, b=red.b)


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


def solve_feasibility(
    problem: Problem,
    *,
    strictness: str = "abort",
    bit_cap: int = DEFAULT_BIT_CAP,
    rounding: bool = True,
) -> SolveResult:
    """Decide feasibility of {Ax = b, x >= 0} with exact certificates."""
    problem.validate()
    m, n = problem.m, problem.n

    first = row_reduce(problem.a, problem.b)
    if isinstance(first, Inconsistent):
        delta_sq = compute_delta_sq(problem.a, problem.b)
        delta_hat = isqrt_ceil(delta_sq)
        monitor = Monitor(n, max(delta_hat, 1), strictness)
        audit = AuditLog(m=m, n=n, delta_sq=delta_sq, delta_hat=delta_hat)
        audit.terminal = Terminal(
            reason="input_inconsistent", active=list(range(n)), y=first.y
        )
        stats = monitor.finish()
        stats.delta_sq = delta_sq
        return SolveResult(
            verdict=InfeasibleVerdict(audit=audit), stats=stats, audit=audit
        )

    rows = first.rows
    delta_sq = compute_delta_sq(
        [problem.a[r] for r in rows], [problem.b[r] for r in rows]
    )
    delta_hat = isqrt_ceil(delta_sq)
    scale = ScaleState(
        active=list(range(n)),
        u=[Fraction(delta_hat)] * n,
        fixed=[],
        delta_sq=delta_sq,
        delta_hat=delta_hat,
    )
    monitor = Monitor(n, delta_hat, strictness)
    monitor.stats.delta_sq = delta_sq
    audit = AuditLog(m=m, n=n, delta_sq=delta_sq, delta_hat=delta_hat)
    outer_cap = n * _ceil_log2(delta_sq) + n
    bubble_calls = 0

    def track_bits(values) -> None:
        bits = max_rational_bits(values)
        if bits > monitor.stats.max_bitsize:
            monitor.stats.max_bitsize = bits

    def finish_feasible(x_full: Vector) -> SolveResult:
        if not check_feasible(problem.a, problem.b, x_full):
            raise InternalInvariantError("claimed feasible point fails its checker")
        stats = monitor.finish()
        return SolveResult(
            verdict=FeasibleVerdict(x=x_full), stats=stats, audit=audit
        )

    def finish_infeasible(terminal: Terminal) -> SolveResult:
        audit.terminal = terminal
        stats = monitor.finish()
        return SolveResult(
            verdict=InfeasibleVerdict(audit=audit), stats=stats, audit=audit
        )

    def lift(x_active: Vector) -> Vector:
        out = [ZERO] * n
        for t, j in enumerate(scale.active):
            out[j] = frac(x_active[t])
        return out

    while True:
        a_act = [[problem.a[r][j] for j in scale.active] for r in rows]
        b_act = [problem.b[r] for r in rows]
        reduced = solve_reduced(a_act, b_act)
        if isinstance(reduced, Inconsistent):
            y_full = [ZERO] * m
            for t, r in enumerate(rows):
                y_full[r] = reduced.y[t]
            return finish_infeasible(
                Terminal(
                    reason="reduced_inconsistent",
                    active=list(scale.active),
                    y=y_full,
                )
            )
        if isinstance(reduced, UniqueSolution):
            if all(xi >= 0 for xi in reduced.x):
                return finish_feasible(lift(reduced.x))
            return finish_infeasible(
                Terminal(
                    reason="unique_solution_negative",
                    active=list(scale.active),
                    x_reduced=reduced.x,
                )
            )
        rows = [rows[i] for i in reduced.rows]
        a_run, b_run = reduced.a, reduced.b

        if bubble_calls >= outer_cap:
            raise IterationCapExceeded(
                f"outer loop would exceed {outer_cap} iterations"
            )
        outcome, bstats = run_bubble(
            a_run, b_run, scale.u, rounding=rounding, bit_cap=bit_cap
        )
        bubble_calls += 1
        monitor.stats.bubble_calls.append((len(scale.active), bstats.iterations))
        monitor.stats.bubble_iters_total += bstats.iterations
        monitor.stats.rounding_fallbacks += bstats.rounding_fallbacks
        if bstats.max_bitsize > monitor.stats.max_bitsize:
            monitor.stats.max_bitsize = bstats.max_bitsize

        if isinstance(outcome, Feasible):
            monitor.record_terminal_call(len(scale.active))
            return finish_feasible(lift(outcome.x))

        kind = "farkas_shifted" if isinstance(outcome, FarkasEmptyK) else "separator"
        n_act = len(scale.active)
        if not isinstance(outcome, FarkasEmptyK):
            if not check_separator(a_run, b_run, scale.u, n_act, outcome.v, outcome.w):
                raise InternalInvariantError("separator failed revalidation in driver")
        v_full = [ZERO] * m
        for t, r in enumerate(rows):
            v_full[r] = frac(outcome.v[t])
        active_before = list(scale.active)
        u_before = list(scale.u)
        u_prime = update_bounds(scale.u, outcome.w, n_act)
        u_grid = round_bounds(u_prime, n_act, delta_hat)
        u_after = [min(ub, ug) for ub, ug in zip(u_before, u_grid)]
        scale.u = u_after
        scale, newly_fixed = fix_variables(scale)
        audit.entries.append(
            AuditEntry(
                index=len(audit.entries),
                active=active_before,
                u_before=u_before,
                kind=kind,
                v=v_full,
                w=[frac(x) for x in outcome.w],
                u_after=u_after,
                fixed=newly_fixed,
            )
        )
        track_bits(scale.u)
        monitor.record_iteration(
            u_after_active=scale.u,
            n_fixed_after=len(scale.fixed),
            n_active_before=n_act,
            fixed_this_step=bool(newly_fixed),
        )
