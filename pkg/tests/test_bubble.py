import random
from fractions import Fraction as F
from types import SimpleNamespace

import pytest

from bubblelp.bubble import (
    BubbleState,
    FarkasEmptyK,
    Feasible,
    Separator,
    bubble_step,
    choose_violated_index,
    init_bubble,
    round_coefficients,
    run_bubble,
    snap_to_grid,
)
from bubblelp.certificates import check_farkas, check_separator
from bubblelp.geometry import BitSizeExceeded, d_inner, d_norm_sq

from oracle import null_space, project_kkt


def fv(xs):
    return [F(x) for x in xs]


class TestInitBubble:
    def test_feasible_at_projection(self):
        out = init_bubble([[1, 1]], [1], [2, 2])
        assert isinstance(out, Feasible)
        assert out.x == [F(1, 2), F(1, 2)]

    def test_hand_trace_first_pivot(self):
        st = init_bubble([[1, 1]], [-1], [2, 2])
        assert isinstance(st, BubbleState)
        assert st.r0 == [-F(1, 2), -F(1, 2)]
        assert st.ell == [F(1, 2), F(1, 2)]
        assert st.planes[0].beta_hat == 1
        assert st.planes[1].beta_hat == 1
        assert st.planes[0].norm_sq == F(1, 2)
        assert st.z == [F(1, 2), -F(3, 2)]
        assert st.rho == [F(2), F(0)]
        assert st.gap_sq == 2
        assert st.iters == 1

    def test_free_coordinate_feasible(self):
        out = init_bubble([[1, 0]], [3], [4, 4])
        assert isinstance(out, Feasible)
        assert out.x == [F(3), F(0)]

    def test_constant_coordinate_farkas(self):
        out = init_bubble([[0, 1]], [-1], [2, 2])
        assert isinstance(out, FarkasEmptyK)
        assert out.w == [F(0), F(1)]
        assert check_farkas([[0, 1]], [-1], [F(1, 2), F(1, 2)], out.v, out.w)

    def test_rank_deficient_rejected(self):
        with pytest.raises(ValueError):
            init_bubble([[1, 1], [2, 2]], [1, 2], [2, 2])


class TestChooseViolated:
    def _state(self, z, u):
        return SimpleNamespace(z=fv(z), ctx=SimpleNamespace(u=fv(u)))

    def test_scale_weighted_pick(self):
        assert choose_violated_index(self._state([1, -2, -1], [2, 2, 2])) == 1

    def test_tie_breaks_low(self):
        assert choose_violated_index(self._state([-1, -1], [2, 2])) == 0

    def test_scale_changes_pick(self):
        assert choose_violated_index(self._state([-1, -1], [8, 2])) == 1

    def test_no_violation_raises(self):
        with pytest.raises(ValueError):
            choose_violated_index(self._state([0, 1], [1, 1]))


class TestBubbleStep:
    def test_parallel_pivot_emits_farkas(self):
        st = init_bubble([[1, 1]], [-1], [2, 2])
        out = bubble_step(st, 1)
        assert isinstance(out, FarkasEmptyK)
        assert out.v == [F(-1)]
        assert out.w == [F(1), F(1)]
        # proportional to the reference pair ((-2), (2, 2))
        assert out.v[0] * 2 == F(-2) and [x * 2 for x in out.w] == [F(2), F(2)]
        assert check_farkas([[1, 1]], [-1], st.ell, out.v, out.w)

    def test_independent_pivot_matches_projection_oracle(self):
        st = init_bubble([[1, 1, 1]], [-1], [2, 2, 2])
        assert isinstance(st, BubbleState)
        i = choose_violated_index(st)
        assert i == 1
        g = [a - b for a, b in zip(st.z, st.r0)]
        grow = [d * gk for d, gk in zip(st.ctx.d, g)]
        c3 = [fv([1, 1, 1]), grow, fv([0, 1, 0])]
        d3 = [F(-1), st.gap_sq, st.ell[1]]
        expect = project_kkt(c3, d3, st.r0, st.ctx.u)
        out = bubble_step(st, i)
        assert isinstance(out, BubbleState)
        assert out.z == expect
        n = st.ctx.n_active
        assert out.gap_sq - st.gap_sq > F(1, n * n)

    def test_constant_pivot_emits_farkas(self):
        # the constant coordinate never survives init when violated, but the
        # branch must still produce a checkable pair when exercised directly
        st = init_bubble([[1, 1, 0]], [-1], [2, 2, 2])
        assert isinstance(st, BubbleState)
        out = bubble_step(st, choose_violated_index(st))
        assert isinstance(out, FarkasEmptyK)
        assert check_farkas([[1, 1, 0]], [-1], st.ell, out.v, out.w)


class TestRounding:
    def test_snap_matches_definition(self):
        # q = 16 for a single variable on the unit grid
        assert snap_to_grid(F(3, 10), 16) == F(5, 16)
        assert snap_to_grid(F(0), 16) == 0
        assert snap_to_grid(F(1, 33), 16) == 0  # below half a step drops out
        assert snap_to_grid(F(1, 32), 16) == F(1, 16)  # exact half rounds up

    def test_on_grid_state_unchanged(self):
        st = init_bubble([[1, 1]], [-1], [2, 2])
        # rho = (2, 0) is already a grid multiple for any grid denominator
        new, ok = round_coefficients(st)
        assert ok
        assert new is st

    def test_rounding_limits_bit_growth(self):
        # same instance, same outcome, much smaller rationals when rounding
        a = [[2, -1, 3, 2, 1, 1]]
        b = [-2]
        out_r, stats_r = run_bubble(a, b, [2] * 6, rounding=True)
        out_u, stats_u = run_bubble(a, b, [2] * 6, rounding=False, bit_cap=1 << 20)
        assert type(out_r) is type(out_u)
        assert stats_r.max_bitsize < stats_u.max_bitsize
        assert stats_r.max_bitsize < 64

    def test_rounding_loss_bounded(self):
        # net gain per iteration stays >= 1/(2 n^2) even with rounding on
        rng = random.Random(57)
        seen = 0
        for seed in range(20):
            n = 4 + seed % 3
            a = [[rng.randint(-3, 3) for _ in range(n)]]
            if all(v == 0 for v in a[0]):
                continue
            b = [rng.randint(-6, -1)]
            states = []
            run_bubble(a, b, [2] * n, on_state=states.append)
            bound = F(1, 2 * n * n)
            for prev, cur in zip(states, states[1:]):
                assert cur.gap_sq - prev.gap_sq >= bound
                seen += 1
        assert seen > 0


class TestRunBubble:
    def test_feasible_zero_iterations(self):
        out, stats = run_bubble([[1, 1]], [1], [2, 2])
        assert isinstance(out, Feasible)
        assert stats.iterations == 0

    def test_hand_trace_two_iterations(self):
        out, stats = run_bubble([[1, 1]], [-1], [2, 2])
        assert isinstance(out, FarkasEmptyK)
        assert stats.iterations == 2
        # proportional to ((-2), (2, 2))
        ratio = F(-2) / out.v[0]
        assert ratio > 0
        assert [x * ratio for x in out.w] == [F(2), F(2)]

    def test_bit_cap_enforced(self):
        with pytest.raises(BitSizeExceeded):
            run_bubble([[1, 1]], [-1], [2, 2], bit_cap=1)

    def test_iteration_count_within_cap(self):
        rng = random.Random(13)
        for seed in range(25):
            m = 1 + seed % 3
            n = m + 1 + seed % 3
            a = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(m)]
            from oracle import rank

            if rank(a) < m:
                continue
            b = [rng.randint(-4, 4) for _ in range(m)]
            u = [F(rng.randint(1, 4)) for _ in range(n)]
            out, stats = run_bubble(a, b, u)
            assert stats.iterations <= 8 * n**3 + 1

    def test_emitted_separators_verify(self):
        rng = random.Random(29)
        separators = 0
        for seed in range(40):
            m = 1 + seed % 3
            n = m + 1 + seed % 4
            a = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(m)]
            from oracle import rank

            if rank(a) < m:
                continue
            b = [rng.randint(-9, 9) for _ in range(m)]
            u = [F(1)] * n
            out, _ = run_bubble(a, b, u)
            if isinstance(out, Separator):
                separators += 1
                assert check_separator(a, b, u, n, out.v, out.w)
                assert all(wj >= 0 for wj in out.w)
                assert any(wj != 0 for wj in out.w)
        assert separators > 0


def _sample_shifted_points(a, x0, ell, count, rng):
    """Rational points of {Ax = b, x >= ell} near the planted point."""
    basis = null_space(a)
    n = len(x0)
    out = []
    for _ in range(count):
        x = fv(x0)
        for vec in basis:
            c = F(rng.randint(-24, 24), rng.randint(1, 7))
            x = [xi + c * vi for xi, vi in zip(x, vec)]
        for _ in range(64):
            if all(xi >= li for xi, li in zip(x, ell)):
                break
            x = [(xi + x0i) / 2 for xi, x0i in zip(x, fv(x0))]
        assert all(xi >= li for xi, li in zip(x, ell))
        out.append(x)
    return out


class TestIterateInvariants:
    def test_cut_valid_for_shifted_region(self):
        # the running inequality <z, x>_D >= ||z||_D^2 must hold on the
        # shifted region at every iterate, exactly
        rng = random.Random(41)
        checked = 0
        for seed in range(12):
            n = 3 + seed % 3
            m = 1 + seed % 2
            a = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(m)]
            from oracle import rank

            if rank(a) < m:
                continue
            u = [F(4 * n)] * n
            x0 = [rng.randint(3, 8) for _ in range(n)]
            b = [sum(a[r][j] * x0[j] for j in range(n)) for r in range(m)]
            ell = [uj / (2 * n) for uj in u]
            assert all(F(x0j) >= lj for x0j, lj in zip(x0, ell))
            samples = _sample_shifted_points(a, x0, ell, 200, rng)
            states = []
            run_bubble(a, b, u, on_state=states.append)
            for st in states:
                norm_sq = st.r0_norm_sq + st.gap_sq
                for x in samples:
                    assert d_inner(st.z, x, st.ctx) >= norm_sq
                checked += 1
        assert checked > 0

    def test_progress_decomposition_and_pivot_history(self):
        rng = random.Random(43)
        runs = 0
        for seed in range(25):
            m = 1 + seed % 3
            n = m + 1 + seed % 4
            a = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(m)]
            from oracle import rank

            if rank(a) < m:
                continue
            b = [rng.randint(-6, 6) for _ in range(m)]
            u = [F(rng.randint(1, 3))] * n
            states = []
            run_bubble(a, b, u, on_state=states.append)
            if len(states) < 2:
                continue
            runs += 1
            min_gain = F(1, 2 * n * n)
            for prev, cur in zip(states, states[1:]):
                assert cur.gap_sq - prev.gap_sq >= min_gain
            assert states[0].gap_sq > F(1, n * n)
            for st in states:
                g = [zi - ri for zi, ri in zip(st.z, st.r0)]
                assert d_norm_sq(g, st.ctx) == st.gap_sq
                assert d_norm_sq(st.z, st.ctx) == st.r0_norm_sq + st.gap_sq
                rebuilt = [F(0)] * n
                for j, rj in enumerate(st.rho):
                    assert rj >= 0
                    if rj:
                        for k in range(n):
                            rebuilt[k] += rj * st.planes[j].p[k]
                assert rebuilt == g
                for j, rj in enumerate(st.rho):
                    if rj > 0:
                        bh = st.planes[j].beta_hat
                        assert bh * bh <= st.gap_sq * st.planes[j].norm_sq
        assert runs > 0
