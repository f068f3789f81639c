import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ehaoi.erlang import (
    ErlangSpec,
    PoissonTables,
    erlang_cdf,
    erlang_cdf_table,
    erlang_survival,
    poisson_head,
    survival_partial_moment,
)

mpmath.mp.dps = 30


def quad_partial_moment(shape, rate, p, a, b):
    """High-precision quadrature of ``x**p * P(Erlang > x)`` with mpmath."""
    if shape <= 0:
        return 0.0
    surv = lambda x: x**p * mpmath.gammainc(shape, rate * x, mpmath.inf, regularized=True)
    mode = max((shape - 1) / rate, 0.0)
    pts = sorted({a, b} | ({mode} if a < mode < b else set()))
    return float(mpmath.quad(surv, pts))


class TestPointFunctions:
    def test_exponential_case(self):
        spec = ErlangSpec(1, 2.0)
        assert erlang_cdf(spec, 0.5) == pytest.approx(1 - math.exp(-1), rel=1e-15)
        assert erlang_survival(spec, 0.5) == pytest.approx(math.exp(-1), rel=1e-15)

    def test_degenerate_shape_is_point_mass_at_zero(self):
        assert erlang_cdf(ErlangSpec(0, 1.0), 0.0) == 1.0
        assert erlang_cdf(ErlangSpec(-3, 1.0), 2.0) == 1.0
        assert erlang_survival(ErlangSpec(0, 1.0), 0.0) == 0.0

    def test_poisson_head_edges(self):
        assert poisson_head(0, 1.0) == 0.0
        assert poisson_head(3, math.inf) == 0.0
        assert poisson_head(2, 0.0) == 1.0

    @pytest.mark.parametrize("shape", [1, 2, 5, 12, 40])
    @pytest.mark.parametrize("x", [0.0, 1e-3, 0.7, 3.0, 25.0])
    def test_cdf_against_gamma(self, shape, x):
        rate = 1.3
        ref = stats.gamma.cdf(x, a=shape, scale=1 / rate)
        got = erlang_cdf(ErlangSpec(shape, rate), x)
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)

    def test_small_cdf_keeps_relative_accuracy(self):
        # 1 - Q would round to 0 here; the tail series must not
        got = erlang_cdf(ErlangSpec(10, 1.0), 1e-3)
        ref = float(mpmath.gammainc(10, 0, 1e-3, regularized=True))
        assert got == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("x", [-1.0, math.nan, math.inf])
    def test_bad_x(self, x):
        with pytest.raises(ValueError):
            erlang_cdf(ErlangSpec(2, 1.0), x)

    @pytest.mark.parametrize("rate", [0.0, -1.0, math.inf, math.nan])
    def test_bad_rate(self, rate):
        with pytest.raises(ValueError):
            ErlangSpec(2, rate)

    def test_table_matches_scalar(self):
        xs = np.array([0.0, 0.4, 1.1, 6.0])
        table = erlang_cdf_table(0.8, xs, 6)
        for r, x in enumerate(xs):
            for n in range(7):
                assert table[r, n] == pytest.approx(erlang_cdf(ErlangSpec(n, 0.8), x), rel=1e-13, abs=1e-15)

    def test_infinite_points_in_tables(self):
        t = PoissonTables.build(np.array([np.inf]), 3)
        assert np.all(t.cdf == 1.0)
        assert np.all(t.first == 0.0) and np.all(t.second == 0.0)


class TestPartialMoment:
    @pytest.mark.parametrize(
        "shape,rate,a,b",
        [(1, 1.0, 0.0, math.inf), (3, 2.0, 0.0, math.inf), (5, 0.5, 0.0, math.inf), (12, 10.0, 0.0, math.inf)],
    )
    def test_full_moments(self, shape, rate, a, b):
        # int_0^inf S = E[Y], int_0^inf x S = E[Y^2] / 2
        mean = shape / rate
        second = shape * (shape + 1) / rate**2
        assert survival_partial_moment(ErlangSpec(shape, rate), 0, a, b) == pytest.approx(mean, rel=1e-13)
        assert survival_partial_moment(ErlangSpec(shape, rate), 1, a, b) == pytest.approx(second / 2, rel=1e-13)

    def test_degenerate_shape_integrates_to_zero(self):
        assert survival_partial_moment(ErlangSpec(0, 1.0), 0, 0.0, 5.0) == 0.0
        assert survival_partial_moment(ErlangSpec(-2, 1.0), 1, 1.0, math.inf) == 0.0

    def test_vectorised_matches_scalar(self):
        shapes = np.array([1, 2, 4, 7])
        a = np.array([0.0, 0.3, 1.0, 2.0])
        b = np.array([1.0, np.inf, 4.0, 2.5])
        vec = survival_partial_moment((shapes, 1.7), 1, a, b)
        for k in range(4):
            assert vec[k] == survival_partial_moment(ErlangSpec(int(shapes[k]), 1.7), 1, a[k], b[k])

    @pytest.mark.parametrize(
        "p,a,b",
        [(2, 0.0, 1.0), (0, -1.0, 1.0), (0, 2.0, 1.0), (1, math.inf, math.inf), (0, math.nan, 1.0)],
    )
    def test_rejects(self, p, a, b):
        with pytest.raises(ValueError):
            survival_partial_moment(ErlangSpec(2, 1.0), p, a, b)

    @given(
        shape=st.integers(1, 12),
        rate=st.floats(0.1, 10.0),
        cuts=st.lists(st.floats(0.0, 30.0), min_size=3, max_size=3),
        p=st.sampled_from([0, 1]),
    )
    def test_additive_over_adjacent_intervals(self, shape, rate, cuts, p):
        a, m, b = sorted(cuts)
        spec = ErlangSpec(shape, rate)
        whole = survival_partial_moment(spec, p, a, b)
        parts = survival_partial_moment(spec, p, a, m) + survival_partial_moment(spec, p, m, b)
        scale = survival_partial_moment(spec, p, 0.0, math.inf)
        assert abs(whole - parts) <= 1e-12 * max(1.0, scale)

    @given(shape=st.integers(1, 12), rate=st.floats(0.1, 10.0), a=st.floats(0.0, 20.0), d=st.floats(0.0, 5.0))
    def test_monotone_in_upper_limit(self, shape, rate, a, d):
        spec = ErlangSpec(shape, rate)
        lo = survival_partial_moment(spec, 0, a, a + d)
        hi = survival_partial_moment(spec, 0, a, a + d + 0.5)
        assert hi >= lo

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(10):
            shape = int(rng.integers(1, 13))
            rate = float(rng.uniform(0.1, 10.0))
            a = float(rng.uniform(0.0, 3.0 * shape / rate))
            b = math.inf if rng.random() < 0.3 else a + float(rng.uniform(0.0, 3.0 * shape / rate))
            p = int(rng.integers(0, 2))
            ref = quad_partial_moment(shape, rate, p, a, b)
            got = survival_partial_moment(ErlangSpec(shape, rate), p, a, b)
            assert abs(got - ref) <= 1e-10
