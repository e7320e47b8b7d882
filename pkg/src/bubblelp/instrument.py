"""Potential accounting for the outer loop, as live assertions and stats.

The monitored quantity is Psi = sum_j log max(u_j, 1/delta_hat) over all
original variables, which starts at n*log(delta_hat), never increases, and
must drop by at least half of log(n_active + 1) on every outer iteration
that does not fix a variable.  These are guarantees of the underlying
scheme, evaluated here in floating point with a small slack; a violation is
a defect report, raised in "abort" mode and recorded in "warn" mode, because
the bound substitutions used by this artifact could in principle shave the
constants without making the solver unsound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .geometry import SolverError

EPS_INSTR = 1e-9
_FLOAT_MAX_BITS = 512


class InstrumentationError(SolverError):
    """A monitored potential guarantee failed in abort mode."""


def _log_int(x: int) -> float:
    if x <= 0:
        raise ValueError("log of nonpositive integer")
    if x.bit_length() <= _FLOAT_MAX_BITS:
        return math.log(x)
    shift = x.bit_length() - _FLOAT_MAX_BITS
    return math.log(x >> shift) + shift * math.log(2)


def log_fraction(x: Fraction) -> float:
    """Natural log of a positive rational, safe for huge numerators."""
    return _log_int(x.numerator) - _log_int(x.denominator)


def potential(u_active, n_fixed: int, delta_hat: int) -> float:
    """Psi = sum over all variables of log max(u_j, 1/delta_hat).

    Fixed variables sit at the floor and contribute -log(delta_hat) each.
    """
    floor = Fraction(1, delta_hat)
    total = -n_fixed * _log_int(delta_hat)
    for uj in u_active:
        total += log_fraction(max(Fraction(uj), floor))
    return total + 0.0  # normalizes -0.0


@dataclass
class PhaseStats:
    phase: int
    iterations: int = 0
    potential_drop: float = 0.0
    drops: list = field(default_factory=list)


@dataclass
class RunStats:
    n: int = 0
    delta_sq: int = 0
    delta_hat: int = 0
    outer_iters: int = 0
    outer_iter_bound: float = 0.0
    bubble_iters_total: int = 0
    max_bitsize: int = 0
    rounding_fallbacks: int = 0
    phases: list = field(default_factory=list)
    potential_trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    bubble_calls: list = field(default_factory=list)  # (n_active, iterations)


class Monitor:
    """Tracks the potential across one solve and enforces the drop bounds."""

    def __init__(self, n: int, delta_hat: int, strictness: str = "abort"):
        if strictness not in ("abort", "warn"):
            raise ValueError(f"unknown strictness {strictness!r}")
        self.n = n
        self.delta_hat = delta_hat
        self.strictness = strictness
        self.stats = RunStats(n=n, delta_hat=delta_hat)
        self._phases: dict[int, PhaseStats] = {}
        self._psi = potential([Fraction(delta_hat)] * n, 0, delta_hat)
        self.stats.potential_trace.append(self._psi)

    def _fail(self, msg: str) -> None:
        if self.strictness == "abort":
            raise InstrumentationError(msg)
        self.stats.warnings.append(msg)

    def record_iteration(
        self,
        u_after_active,
        n_fixed_after: int,
        n_active_before: int,
        fixed_this_step: bool,
    ) -> None:
        """One outer iteration finished: update Psi, assert the drop bound."""
        k = (self.n - n_active_before) + 1
        psi_new = potential(u_after_active, n_fixed_after, self.delta_hat)
        drop = self._psi - psi_new
        if drop < -EPS_INSTR:
            self._fail(f"potential increased by {-drop} at phase {k}")
        phase = self._phases.get(k)
        if phase is None:
            phase = PhaseStats(phase=k)
            self._phases[k] = phase
        phase.iterations += 1
        phase.potential_drop += drop
        phase.drops.append(drop)
        if not fixed_this_step:
            needed = 0.5 * math.log(n_active_before + 1)
            if drop < needed - EPS_INSTR:
                self._fail(
                    f"potential drop {drop:.12g} below {needed:.12g}"
                    f" at phase {k} (no fixing)"
                )
        self._psi = psi_new
        self.stats.potential_trace.append(psi_new)
        self.stats.outer_iters += 1

    def record_terminal_call(self, n_active_before: int) -> None:
        """A solver call that ended the run without touching the bounds."""
        k = (self.n - n_active_before) + 1
        phase = self._phases.get(k)
        if phase is None:
            phase = PhaseStats(phase=k)
            self._phases[k] = phase
        phase.iterations += 1
        phase.drops.append(0.0)
        self.stats.potential_trace.append(self._psi)
        self.stats.outer_iters += 1

    def finish(self) -> RunStats:
        """Close out the run and check the aggregate iteration bound."""
        self.stats.phases = [self._phases[k] for k in sorted(self._phases)]
        calls = sum(p.iterations for p in self.stats.phases)
        if calls != self.stats.outer_iters:
            self._fail("phase partition does not cover all outer iterations")
        log_delta = _log_int(self.delta_hat) if self.delta_hat > 1 else 0.0
        bound = (self.n - 1) + 2 * log_delta * sum(
            1.0 / math.log(self.n - i + 2) for i in range(1, self.n + 1)
        )
        self.stats.outer_iter_bound = bound
        if self.stats.outer_iters and self.stats.outer_iters > bound + EPS_INSTR:
            self._fail(
                f"outer iterations {self.stats.outer_iters} exceed"
                f" potential bound {bound:.6g}"
            )
        return self.stats
