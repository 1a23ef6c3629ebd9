import math

import numpy as np
import pytest
from scipy import integrate

from dmrsim import analytics
from dmrsim.analytics import (
    BoundaryVerdict,
    DensityRegime,
    TestFunction,
    ckls_normalizer,
    classify_boundary,
    find_negativity_radius,
    generator_apply,
    linear_explicit_solution,
    lyapunov_negativity_scan,
    mean_internal,
    quadratic_lyapunov,
    scale_function,
    second_moment_cir,
    second_moment_linear,
    stationary_density,
)
from dmrsim.errors import NonErgodic, QuadratureFailure, WrongRegime
from dmrsim.model import ExternalParams, GridSpec, InternalParams, ModelParams


def internal(a2=1.0, b2=1.0, sigma2=1.0, alpha2=0.5, y0=1.0):
    return InternalParams(a2=a2, b2=b2, sigma2=sigma2, alpha2=alpha2, y0=y0)


def coupled(a1=1.0, b1=2.0, sigma1=0.5, alpha1=0.6, x0=1.0, **kw):
    return ModelParams(
        internal=internal(**kw),
        external=ExternalParams(a1=a1, b1=b1, sigma1=sigma1, alpha1=alpha1, x0=x0),
    )


def ode_mean(p, t_end):
    """First-moment ODE m' = a2 - b2 m integrated at tight tolerance."""
    sol = integrate.solve_ivp(lambda t, m: p.a2 - p.b2 * m, (0.0, t_end), [p.y0],
                              rtol=1e-12, atol=1e-14, dense_output=True)
    return float(sol.y[0, -1])


def ode_second_moment(p, t_end):
    """Second-moment ODE: f' = 2 a2 m + (sigma^2 - 2 b2) f   (alpha2 = 1)
                          f' = (2 a2 + sigma^2) m - 2 b2 f   (alpha2 = 1/2)."""
    s2 = p.sigma2 ** 2

    def rhs(t, state):
        m, f = state
        dm = p.a2 - p.b2 * m
        if p.alpha2 == 1.0:
            df = 2.0 * p.a2 * m + (s2 - 2.0 * p.b2) * f
        else:
            df = (2.0 * p.a2 + s2) * m - 2.0 * p.b2 * f
        return [dm, df]

    sol = integrate.solve_ivp(rhs, (0.0, t_end), [p.y0, p.y0 ** 2],
                              rtol=1e-12, atol=1e-14)
    return float(sol.y[1, -1])


class TestMean:
    def test_at_zero_returns_y0(self):
        assert mean_internal(internal(y0=2.0), 0.0) == 2.0

    def test_fixed_point_of_mean_ode(self):
        p = internal(a2=3.0, b2=2.0, y0=1.5)  # y0 = a2/b2
        for t in (0.0, 0.3, 1.0, 10.0):
            assert mean_internal(p, t) == pytest.approx(1.5, abs=1e-15)

    def test_matches_ode_oracle_and_closed_value(self):
        p = internal(a2=1.0, b2=1.0, sigma2=0.5, alpha2=1.0, y0=2.0)
        assert mean_internal(p, 1.0) == pytest.approx(1.0 + math.exp(-1.0), abs=1e-12)
        assert mean_internal(p, 1.0) == pytest.approx(ode_mean(p, 1.0), abs=1e-10)

    def test_monotone_toward_level(self):
        t = np.linspace(0.0, 5.0, 200)
        down = mean_internal(internal(y0=3.0, a2=1.0, b2=1.0), t)
        up = mean_internal(internal(y0=0.2, a2=1.0, b2=1.0), t)
        assert np.all(np.diff(down) < 0) and down.min() > 1.0
        assert np.all(np.diff(up) > 0) and up.max() < 1.0


class TestSecondMomentLinear:
    def test_t_zero_all_branches(self):
        for sigma2 in (0.5, 1.0, math.sqrt(2.0)):
            p = internal(sigma2=sigma2, alpha2=1.0, y0=3.0)
            assert second_moment_linear(p, 0.0) == pytest.approx(9.0, rel=1e-14)

    @pytest.mark.parametrize("sigma2", [0.5, 1.0, math.sqrt(2.0), 0.9, 1.5])
    def test_matches_second_moment_ode(self, sigma2):
        p = internal(a2=1.0, b2=1.0, sigma2=sigma2, alpha2=1.0, y0=2.0)
        for t in (0.25, 1.0, 3.0):
            assert second_moment_linear(p, t) == pytest.approx(
                ode_second_moment(p, t), rel=1e-9)

    def test_near_degenerate_window_uses_limit_branch(self):
        base = internal(a2=1.0, b2=1.0, sigma2=1.0, alpha2=1.0, y0=2.0)
        nudged = internal(a2=1.0, b2=1.0, sigma2=math.sqrt(1.0 + 1e-10),
                          alpha2=1.0, y0=2.0)
        assert second_moment_linear(nudged, 1.0) == pytest.approx(
            second_moment_linear(base, 1.0), rel=1e-9)

    def test_variance_vanishes_for_a2_zero_subcritical(self):
        # Var Y_t -> 0 when a2 = 0 and sigma2^2 < 2 b2
        p = internal(a2=0.0, b2=1.0, sigma2=1.0, alpha2=1.0, y0=2.0)
        t = 60.0
        var = second_moment_linear(p, t) - mean_internal(p, t) ** 2
        assert abs(var) < 1e-12

    def test_wrong_regime(self):
        with pytest.raises(WrongRegime):
            second_moment_linear(internal(alpha2=0.5), 1.0)


class TestSecondMomentCir:
    def test_t_zero(self):
        assert second_moment_cir(internal(y0=1.0), 0.0) == pytest.approx(1.0, rel=1e-14)

    def test_matches_second_moment_ode(self):
        p = internal(a2=1.0, b2=2.0, sigma2=1.0, alpha2=0.5, y0=1.0)
        for t in (0.1, 0.5, 2.0):
            assert second_moment_cir(p, t) == pytest.approx(
                ode_second_moment(p, t), rel=1e-9)

    def test_variance_limit(self):
        p = internal(a2=1.0, b2=2.0, sigma2=1.0, alpha2=0.5, y0=1.0)
        t = 40.0
        var = second_moment_cir(p, t) - mean_internal(p, t) ** 2
        assert var == pytest.approx(p.a2 * p.sigma2 ** 2 / (2 * p.b2 ** 2), rel=1e-10)
        assert analytics.stationary_variance_cir(p) == pytest.approx(0.125)

    def test_wrong_regime(self):
        with pytest.raises(WrongRegime):
            second_moment_cir(internal(alpha2=1.0), 1.0)


class TestStationaryDensity:
    def test_gamma_regime_shape_rate_and_mode(self):
        p = internal(a2=2.0, b2=1.0, sigma2=1.0, alpha2=0.5)
        dens = stationary_density(p)
        assert dens.regime == DensityRegime.GAMMA
        shape, rate = 2 * p.a2 / p.sigma2 ** 2, 2 * p.b2 / p.sigma2 ** 2
        from scipy import stats
        xs = np.geomspace(0.01, 20.0, 50)
        assert np.allclose(dens(xs), stats.gamma.pdf(xs, a=shape, scale=1 / rate),
                           rtol=1e-12)
        # mode of a shape>1 gamma density at (shape-1)/rate
        grid = np.linspace(0.01, 5.0, 20001)
        assert grid[np.argmax(dens(grid))] == pytest.approx((shape - 1) / rate, abs=1e-3)

    def test_inverse_gamma_mean_is_a2_over_b2(self):
        # quadrature cross-check of the analytic mean (needs 2 b2/sigma2^2 > 1)
        p = internal(a2=1.5, b2=1.0, sigma2=1.0, alpha2=1.0)
        dens = stationary_density(p)
        mean = integrate.quad(lambda x: x * float(dens(np.array([x]))[0]),
                              0.0, np.inf, limit=300)[0]
        assert mean == pytest.approx(p.a2 / p.b2, rel=1e-8)

    @pytest.mark.parametrize("alpha2,sigma2,a2", [
        (0.5, 1.0, 1.0), (0.5, 0.7, 0.2), (0.75, 1.0, 1.0), (0.75, 1.5, 2.0),
        (0.6, 0.8, 0.5), (1.0, 1.0, 1.0), (1.0, 0.5, 2.0),
    ])
    def test_normalization_across_sweep(self, alpha2, sigma2, a2):
        p = internal(a2=a2, b2=1.0, sigma2=sigma2, alpha2=alpha2)
        dens = stationary_density(p)
        total = integrate.quad(lambda x: float(dens(np.array([x]))[0]),
                               0.0, np.inf, limit=300)[0]
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_nonergodic_raises(self):
        with pytest.raises(NonErgodic):
            stationary_density(internal(a2=0.0))

    def test_ckls_normalizer_against_bessel_closed_form(self):
        # for a2 = b2 = sigma2 = 1, alpha2 = 3/4 the normalizing integral is
        # 4 K_1(8); value frozen from mpmath (30 digits) and scipy.special.kv
        p = internal(a2=1.0, b2=1.0, sigma2=1.0, alpha2=0.75)
        frozen = 1609.0704013724862
        for strategy in ("exp_map", "direct"):
            assert abs(ckls_normalizer(p, strategy) - frozen) / frozen < 1e-8

    def test_ckls_strategies_agree_to_1e8(self):
        for a2, b2, s2 in [(1.0, 1.0, 1.0), (0.3, 2.0, 0.7), (2.5, 0.5, 1.2)]:
            p = internal(a2=a2, b2=b2, sigma2=s2, alpha2=0.8)
            g1 = ckls_normalizer(p, "exp_map")
            g2 = ckls_normalizer(p, "direct")
            assert abs(g1 - g2) / g1 < 1e-8

    def test_ckls_stationary_mean_is_a2_over_b2(self):
        p = internal(a2=1.0, b2=1.0, sigma2=1.0, alpha2=0.75)
        dens = stationary_density(p)
        mean = integrate.quad(lambda x: x * float(dens(np.array([x]))[0]),
                              0.0, np.inf, limit=300)[0]
        assert mean == pytest.approx(1.0, rel=1e-8)


class TestScaleFunction:
    def test_anchored_at_c(self):
        assert scale_function(internal(), 1.0, 1.0) == 0.0

    def test_strictly_increasing_on_grid(self):
        p = internal(a2=1.0, b2=1.0, sigma2=1.0, alpha2=0.5)
        xs = np.linspace(0.2, 3.0, 25)
        vals = [scale_function(p, 1.0, float(x)) for x in xs]
        assert np.all(np.diff(vals) > 0)

    def test_cir_value_against_double_quadrature(self):
        # brute-force oracle: nested numerical quadrature of the defining
        # formula, inner integral evaluated numerically per outer point
        p = internal(a2=1.0, b2=1.0, sigma2=1.0, alpha2=0.5)
        c = 1.0

        def inner(y):
            val, _ = integrate.quad(
                lambda z: 2.0 * (p.a2 - p.b2 * z) / (p.sigma2 ** 2 * z), c, y,
                epsabs=1e-13, epsrel=1e-11)
            return val

        oracle, _ = integrate.quad(lambda y: math.exp(-inner(y)), c, 2.0,
                                   epsabs=1e-10, epsrel=1e-9, limit=200)
        assert scale_function(p, c, 2.0) == pytest.approx(oracle, abs=1e-6)

    def test_zero_boundary_finiteness_flips_at_feller_ratio(self):
        from dmrsim.analytics import _numeric_scale_limit
        sub = internal(a2=0.45, b2=1.0, sigma2=1.0, alpha2=0.5)   # 2a2/s2 < 1
        sup = internal(a2=0.55, b2=1.0, sigma2=1.0, alpha2=0.5)   # 2a2/s2 > 1
        assert math.isfinite(_numeric_scale_limit(sub, 1.0, toward_zero=True))
        assert _numeric_scale_limit(sup, 1.0, toward_zero=True) == -math.inf


class TestClassifyBoundary:
    def test_cir_recurrent(self):
        cls = classify_boundary(internal(a2=1.0, sigma2=1.0, alpha2=0.5))
        assert cls.verdict == BoundaryVerdict.RECURRENT_OSCILLATING
        assert cls.strictly_positive
        assert cls.s_at_zero == -math.inf and cls.s_at_infinity == math.inf

    def test_cir_hits_zero_reflecting(self):
        cls = classify_boundary(internal(a2=0.25, sigma2=1.0, alpha2=0.5))
        assert cls.verdict == BoundaryVerdict.HITS_ZERO_REFLECTING
        assert not cls.strictly_positive
        assert math.isfinite(cls.s_at_zero) and cls.s_at_infinity == math.inf

    def test_ckls_converges_to_zero(self):
        cls = classify_boundary(internal(a2=0.0, sigma2=1.0, alpha2=0.75))
        assert cls.verdict == BoundaryVerdict.CONVERGES_TO_ZERO_AS
        assert math.isfinite(cls.s_at_zero)

    def test_linear_recurrent_scale_pattern(self):
        cls = classify_boundary(internal(a2=1.0, sigma2=1.0, alpha2=1.0))
        assert cls.verdict == BoundaryVerdict.RECURRENT_OSCILLATING
        assert cls.s_at_zero == -math.inf and cls.s_at_infinity == math.inf


class TestGenerator:
    def test_constant_function_killed(self):
        f = TestFunction(value=lambda x, y: 5.0,
                         grad=lambda x, y: (0.0, 0.0),
                         hess_diag=lambda x, y: (0.0, 0.0))
        assert generator_apply(coupled(), f, (1.0, 2.0)) == 0.0

    def test_linear_function_gives_drift(self):
        f = TestFunction(value=lambda x, y: x,
                         grad=lambda x, y: (1.0, 0.0),
                         hess_diag=lambda x, y: (0.0, 0.0))
        mp = coupled(a1=1.0, b1=2.0)
        x, y = 0.7, 1.3
        assert generator_apply(mp, f, (x, y)) == pytest.approx(1.0 * y - 2.0 * x)

    def test_lyapunov_quadratic_display(self):
        # A V = 2y(a2 - b2 y) + sigma2^2 y^{2 a2} + 2k^2 x(a1 y - b1 x)
        #       + sigma1^2 k^2 x^{2 a1}
        mp = coupled(a1=1.0, b1=2.0, sigma1=0.5, alpha1=0.6,
                     a2=1.0, b2=2.0, sigma2=0.5, alpha2=0.6)
        k, x, y = 0.5, 1.7, 0.9
        expected = (2 * y * (1 - 2 * y) + 0.25 * y ** 1.2
                    + 2 * k ** 2 * x * (y - 2 * x) + 0.25 * k ** 2 * x ** 1.2)
        got = generator_apply(mp, quadratic_lyapunov(k), (x, y))
        assert got == pytest.approx(expected, rel=1e-14)

    def test_weak_generator_against_euler_step_mc(self):
        # E[V(one Euler step) - V]/dt estimated over many normal draws should
        # match A V at the point up to the exact O(dt) drift-squared term
        mp = coupled(a1=1.0, b1=2.0, sigma1=0.5, alpha1=0.6,
                     a2=1.0, b2=2.0, sigma2=0.5, alpha2=0.6)
        k = 0.5
        x, y = 1.0, 1.0
        dt = 1e-3
        rng = np.random.default_rng(5)
        n = 200_000
        xi = rng.standard_normal((n, 2))
        ex, it = mp.external, mp.internal
        drift_x = ex.a1 * y - ex.b1 * x
        drift_y = it.a2 - it.b2 * y
        xn = x + drift_x * dt + ex.sigma1 * x ** ex.alpha1 * math.sqrt(dt) * xi[:, 0]
        yn = y + drift_y * dt + it.sigma2 * y ** it.alpha2 * math.sqrt(dt) * xi[:, 1]
        v = quadratic_lyapunov(k)
        incr = (yn ** 2 + k ** 2 * xn ** 2 - v.value(x, y)) / dt
        mc = float(np.mean(incr))
        se = float(np.std(incr, ddof=1) / math.sqrt(n))
        target = generator_apply(mp, v, (x, y)) + dt * (k ** 2 * drift_x ** 2 + drift_y ** 2)
        assert abs(mc - target) < 3.0 * se


class TestLyapunovScan:
    def test_decoupled_drift_negative_far_out(self):
        mp = coupled(a1=0.0, b1=1.0, sigma1=0.5, alpha1=0.6,
                     a2=1.0, b2=1.0, sigma2=0.5, alpha2=0.6)
        rep = lyapunov_negativity_scan(mp, k=0.3, radius=10.0)
        assert rep.all_nonpositive

    def test_generic_params_find_finite_radius(self):
        mp = coupled(a1=1.0, b1=2.0, sigma1=0.5, alpha1=0.6,
                     a2=1.0, b2=2.0, sigma2=0.5, alpha2=0.6)
        r0 = find_negativity_radius(mp, k=0.5)
        assert r0 is not None and r0 <= 8.0
        assert lyapunov_negativity_scan(mp, 0.5, r0).covered_by_theory

    def test_oversized_k_reports_positives_near_diagonal(self):
        # on the diagonal (x, x) the quadratic part of A V has coefficient
        # -2 b2 + k^2 (2 a1 - 2 b1); with a1 > b1 and large k it is positive
        mp = coupled(a1=4.0, b1=1.0, sigma1=0.5, alpha1=0.6,
                     a2=1.0, b2=1.0, sigma2=0.5, alpha2=0.6)
        k = 3.0
        coeff = -2.0 * mp.internal.b2 + k ** 2 * (2 * mp.external.a1 - 2 * mp.external.b1)
        assert coeff > 0
        rep = lyapunov_negativity_scan(mp, k=k, radius=100.0)
        assert not rep.all_nonpositive


class TestLinearExplicitSolution:
    def test_a2_zero_is_pure_exponential(self):
        p = internal(a2=0.0, b2=1.0, sigma2=0.8, alpha2=1.0, y0=2.0)
        grid = GridSpec(t_end=1.0, n_steps=64)
        rng = np.random.default_rng(3)
        b = np.concatenate([[0.0], np.cumsum(math.sqrt(grid.dt) * rng.standard_normal(64))])
        y = linear_explicit_solution(p, b, grid)
        t = grid.times()
        r = -(p.b2 + 0.5 * p.sigma2 ** 2) * t + p.sigma2 * b
        assert np.allclose(y, 2.0 * np.exp(r), rtol=1e-14)

    def test_deterministic_limit_matches_mean_formula(self):
        p = internal(a2=1.0, b2=2.0, sigma2=0.0, alpha2=1.0, y0=3.0)
        grid = GridSpec(t_end=2.0, n_steps=4000)
        y = linear_explicit_solution(p, np.zeros(4001), grid)
        expected = mean_internal(p, grid.times())
        assert np.max(np.abs(y - expected)) < 5e-7  # trapezoid error O(dt^2)

    def test_strict_positivity_on_random_drivers(self):
        p = internal(a2=1.0, b2=1.0, sigma2=1.5, alpha2=1.0, y0=0.5)
        grid = GridSpec(t_end=1.0, n_steps=200)
        rng = np.random.default_rng(11)
        for _ in range(50):
            b = np.concatenate([[0.0],
                                np.cumsum(math.sqrt(grid.dt) * rng.standard_normal(200))])
            assert np.all(linear_explicit_solution(p, b, grid) > 0.0)

    def test_wrong_regime_and_bad_driver(self):
        grid = GridSpec(t_end=1.0, n_steps=10)
        with pytest.raises(WrongRegime):
            linear_explicit_solution(internal(alpha2=0.5), np.zeros(11), grid)
        with pytest.raises(ValueError):
            linear_explicit_solution(internal(alpha2=1.0), np.zeros(5), grid)
