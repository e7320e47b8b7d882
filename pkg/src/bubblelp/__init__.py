"""Exact LP-feasibility solver for {Ax = b, x >= 0} over integer data.

A projection-type method in a diagonally weighted geometry: an inner loop
grows the weighted norm of an iterate on the affine set until it either
turns feasible or yields a separating pair, and an outer loop uses each
pair to shrink per-variable upper bounds, fixing variables that fall below
the Hadamard-type threshold.  All solver arithmetic is exact rational;
every emitted object is re-checkable by independent verifiers.
"""

from .bubble import (
    BubbleOutcome,
    FarkasEmptyK,
    Feasible,
    Separator,
    run_bubble,
)
from .certificates import (
    check_farkas,
    check_feasible,
    check_separator,
    replay_audit,
)
from .cli import Config, emit_report, format_problem, gen_random, parse_problem
from .driver import (
    FeasibleVerdict,
    InfeasibleVerdict,
    Problem,
    SolveResult,
    compute_delta_sq,
    solve_feasibility,
)
from .geometry import (
    BitSizeExceeded,
    DContext,
    InternalInvariantError,
    IterationCapExceeded,
    SingularSystem,
    SolverError,
    d_context,
    d_inner,
    d_norm_sq,
    project_affine,
    row_reduce,
)
from .instrument import InstrumentationError, potential

__all__ = [
    "BubbleOutcome",
    "BitSizeExceeded",
    "Config",
    "DContext",
    "FarkasEmptyK",
    "Feasible",
    "FeasibleVerdict",
    "InfeasibleVerdict",
    "InstrumentationError",
    "InternalInvariantError",
    "IterationCapExceeded",
    "Problem",
    "Separator",
    "SingularSystem",
    "SolveResult",
    "SolverError",
    "check_farkas",
    "check_feasible",
    "check_separator",
    "compute_delta_sq",
    "d_context",
    "d_inner",
    "d_norm_sq",
    "emit_report",
    "format_problem",
    "gen_random",
    "parse_problem",
    "potential",
    "project_affine",
    "replay_audit",
    "row_reduce",
    "run_bubble",
    "solve_feasibility",
]

__version__ = "0.1.0"
