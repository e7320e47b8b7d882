import random
from fractions import Fraction as F

import pytest

from bubblelp.geometry import (
    AffineSystem,
    DimensionMismatch,
    Inconsistent,
    Reduced,
    SingularSystem,
    ceil_sqrt_fraction,
    d_context,
    d_inner,
    d_norm_sq,
    gauss_solve,
    isqrt_ceil,
    project_affine,
    row_reduce,
    signed_gap_to_hyperplane,
)

from oracle import null_space, project_kkt, solve_linear


def fv(xs):
    return [F(x) for x in xs]


class TestDInner:
    def test_orthogonal_coordinates(self):
        ctx = d_context([2, 2])
        assert d_inner(fv([1, 0]), fv([0, 1]), ctx) == 0

    def test_unit_weights(self):
        ctx = d_context([2, 2])  # d_ii = 4/4 = 1
        assert d_inner(fv([1, 1]), fv([1, 1]), ctx) == 2

    def test_mixed_weights(self):
        ctx = d_context([1, 2])  # d = (4, 1)
        assert d_inner(fv([1, 2]), fv([1, 2]), ctx) == 8

    def test_dimension_mismatch(self):
        ctx = d_context([1, 2])
        with pytest.raises(DimensionMismatch):
            d_inner(fv([1]), fv([1, 2]), ctx)

    def test_norm_nonnegative(self):
        rng = random.Random(7)
        for _ in range(50):
            n = rng.randint(1, 6)
            ctx = d_context([F(rng.randint(1, 9), rng.randint(1, 9)) for _ in range(n)])
            x = [F(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(n)]
            assert d_norm_sq(x, ctx) >= 0


class TestDContext:
    def test_diagonal_inverse_pairing(self):
        ctx = d_context([F(3, 2), 5, F(1, 7)])
        for d, dinv in zip(ctx.d, ctx.d_inv):
            assert d * dinv == 1

    def test_rejects_nonpositive_bounds(self):
        with pytest.raises(ValueError):
            d_context([1, 0])

    def test_box_inside_ball(self):
        # any 0 <= x <= u has ||x||_D^2 <= 4n
        rng = random.Random(11)
        for _ in range(100):
            n = rng.randint(1, 7)
            u = [F(rng.randint(1, 50), rng.randint(1, 10)) for _ in range(n)]
            ctx = d_context(u)
            x = [uj * F(rng.randint(0, 16), 16) for uj in u]
            assert d_norm_sq(x, ctx) <= 4 * n


class TestRowReduce:
    def test_duplicate_row_dropped(self):
        red = row_reduce([[1, 1], [2, 2]], [1, 2])
        assert isinstance(red, Reduced)
        assert red.rows == [0]
        assert red.a == [fv([1, 1])]
        assert red.b == [F(1)]

    def test_contradictory_duplicate(self):
        red = row_reduce([[1, 1], [2, 2]], [1, 3])
        assert isinstance(red, Inconsistent)
        assert red.y == fv([-2, 1])

    def test_full_rank_untouched(self):
        red = row_reduce([[1, 0], [0, 1]], [3, 4])
        assert isinstance(red, Reduced)
        assert red.rows == [0, 1]
        assert red.a == [fv([1, 0]), fv([0, 1])]

    def test_inconsistency_certificate_property(self):
        rng = random.Random(3)
        found = 0
        for _ in range(200):
            m, n = rng.randint(2, 4), rng.randint(2, 5)
            a = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(m)]
            # duplicate a row with a skewed rhs to force dependence
            a.append(list(a[0]))
            b = [rng.randint(-4, 4) for _ in range(m)] + [rng.randint(-4, 4)]
            red = row_reduce(a, b)
            if isinstance(red, Inconsistent):
                found += 1
                assert all(
                    sum(red.y[r] * a[r][j] for r in range(len(a))) == 0
                    for j in range(n)
                )
                assert sum(red.y[r] * b[r] for r in range(len(a))) != 0
        assert found > 20

    def test_solution_set_preserved(self):
        # points solving the reduced system solve the original and conversely
        rng = random.Random(5)
        for _ in range(60):
            m, n = rng.randint(1, 4), rng.randint(2, 5)
            a = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(m)]
            x0 = [rng.randint(-3, 3) for _ in range(n)]
            b = [sum(a[r][j] * x0[j] for j in range(n)) for r in range(m)]
            red = row_reduce(a, b)
            assert isinstance(red, Reduced)
            basis = null_space(red.a)
            for _ in range(5):
                x = fv(x0)
                for vec in basis:
                    c = F(rng.randint(-5, 5), rng.randint(1, 4))
                    x = [xi + c * vi for xi, vi in zip(x, vec)]
                for r in range(m):
                    assert sum(F(a[r][j]) * x[j] for j in range(n)) == b[r]


class TestProjectAffine:
    def test_symmetric_projection(self):
        ctx = d_context([2, 2])
        y, lam = project_affine(AffineSystem(c=[fv([1, 1])], rhs=fv([2])), fv([0, 0]), ctx)
        assert y == fv([1, 1])
        assert lam == fv([1])

    def test_weighted_projection(self):
        # minimize 4 x1^2 + x2^2 on x1 + x2 = 1
        ctx = d_context([1, 2])
        y, _ = project_affine(AffineSystem(c=[fv([1, 1])], rhs=fv([1])), fv([0, 0]), ctx)
        assert y == [F(1, 5), F(4, 5)]

    def test_fixed_point(self):
        ctx = d_context([3, 5])
        xbar = fv([2, 1])
        y, lam = project_affine(AffineSystem(c=[fv([1, 1])], rhs=fv([3])), xbar, ctx)
        assert y == xbar
        assert lam == [F(0)]

    def test_singular_system_raises(self):
        ctx = d_context([1, 1])
        sys = AffineSystem(c=[fv([1, 1]), fv([2, 2])], rhs=fv([1, 2]))
        with pytest.raises(SingularSystem):
            project_affine(sys, fv([0, 0]), ctx)

    def test_matches_kkt_oracle(self):
        rng = random.Random(17)
        for _ in range(60):
            n = rng.randint(2, 5)
            k = rng.randint(1, min(3, n - 1))
            c = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(k)]
            if len({tuple(r) for r in c}) < k:
                continue
            d = [rng.randint(-4, 4) for _ in range(k)]
            u = [F(rng.randint(1, 6)) for _ in range(n)]
            xbar = [F(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(n)]
            expected = project_kkt(c, d, xbar, u)
            if expected is None:
                continue
            ctx = d_context(u)
            y, _ = project_affine(
                AffineSystem(c=[fv(r) for r in c], rhs=fv(d)), xbar, ctx
            )
            assert y == expected

    def test_residual_orthogonality(self):
        # <y - xbar, x - y>_D = 0 for every x in the affine set
        rng = random.Random(23)
        for _ in range(40):
            n = rng.randint(2, 5)
            k = rng.randint(1, min(2, n - 1))
            c = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(k)]
            x0 = [rng.randint(-3, 3) for _ in range(n)]
            d = [sum(c[r][j] * x0[j] for j in range(n)) for r in range(k)]
            from oracle import rank

            if rank(c) < k:
                continue
            u = [F(rng.randint(1, 5)) for _ in range(n)]
            ctx = d_context(u)
            xbar = [F(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(n)]
            y, _ = project_affine(AffineSystem(c=[fv(r) for r in c], rhs=fv(d)), xbar, ctx)
            resid = [yi - xi for yi, xi in zip(y, xbar)]
            basis = null_space(c)
            for vec in basis:
                assert d_inner(resid, vec, ctx) == 0
            # and the projection supports the optimality inequality with equality
            for _ in range(3):
                x = fv(x0)
                for vec in basis:
                    cc = F(rng.randint(-4, 4), rng.randint(1, 3))
                    x = [xi + cc * vi for xi, vi in zip(x, vec)]
                lhs = d_inner(resid, [a - b for a, b in zip(x, y)], ctx)
                assert lhs == 0


class TestSignedGap:
    def test_unit_distance(self):
        ctx = d_context([2, 2])
        p = fv([1, 0])
        dist_sq, sign = signed_gap_to_hyperplane(p, F(1), F(1, 2), fv([-F(1, 2), -F(1, 2)]), ctx)
        assert dist_sq == 1
        assert sign == 1

    def test_on_hyperplane(self):
        ctx = d_context([2, 2])
        p = fv([1, 0])
        dist_sq, sign = signed_gap_to_hyperplane(p, F(1), F(1, 2), fv([F(1, 2), 7]), ctx)
        assert dist_sq == 0
        assert sign == 0

    def test_scale_invariance(self):
        ctx = d_context([2, 2])
        p = fv([1, 0])
        p3 = fv([3, 0])
        base, _ = signed_gap_to_hyperplane(p, F(1), F(1, 2), fv([-F(1, 2), 0]), ctx)
        scaled, _ = signed_gap_to_hyperplane(p3, F(9), F(3, 2), fv([-F(1, 2), 0]), ctx)
        assert base == scaled

    def test_zero_normal_rejected(self):
        ctx = d_context([1, 1])
        with pytest.raises(ValueError):
            signed_gap_to_hyperplane(fv([0, 0]), F(0), F(1), fv([0, 0]), ctx)


class TestIntegerSqrtHelpers:
    @pytest.mark.parametrize("k,expect", [(0, 0), (1, 1), (2, 2), (4, 2), (5, 3), (35, 6), (36, 6), (37, 7)])
    def test_isqrt_ceil(self, k, expect):
        assert isqrt_ceil(k) == expect

    def test_ceil_sqrt_fraction(self):
        assert ceil_sqrt_fraction(F(0)) == 0
        assert ceil_sqrt_fraction(F(1, 2)) == 1
        assert ceil_sqrt_fraction(F(9, 4)) == 2
        assert ceil_sqrt_fraction(F(10, 4)) == 2
        assert ceil_sqrt_fraction(F(17, 4)) == 3
        rng = random.Random(2)
        for _ in range(200):
            x = F(rng.randint(0, 400), rng.randint(1, 40))
            c = ceil_sqrt_fraction(x)
            assert c * c >= x
            assert c == 0 or (c - 1) * (c - 1) < x


class TestGaussSolve:
    def test_known_system(self):
        x = gauss_solve([fv([2, 1]), fv([1, 3])], fv([5, 10]))
        assert x == [F(1), F(3)]

    def test_singular_raises(self):
        with pytest.raises(SingularSystem):
            gauss_solve([fv([1, 2]), fv([2, 4])], fv([1, 2]))

    def test_agrees_with_oracle(self):
        rng = random.Random(31)
        for _ in range(50):
            k = rng.randint(1, 5)
            m = [[rng.randint(-5, 5) for _ in range(k)] for _ in range(k)]
            b = [rng.randint(-5, 5) for _ in range(k)]
            status, expect = solve_linear(m, b)
            if status != "unique":
                continue
            assert gauss_solve([fv(r) for r in m], fv(b)) == expect
