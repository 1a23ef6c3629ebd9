import numpy as np
import pytest

from dmrsim.errors import NotPSD
from dmrsim.model import (
    CorrelationSpec,
    ExternalParams,
    GridSpec,
    InternalParams,
    ModelParams,
    ReflectionSpec,
    cholesky_factor,
    params_from_dict,
    params_to_dict,
    validate,
)


def make_params(**overrides):
    doc = dict(a1=1.0, b1=2.0, sigma1=0.5, alpha1=0.5, x0=1.0,
               a2=1.0, b2=1.0, sigma2=0.5, alpha2=0.5, y0=1.0, s0=1.0)
    doc.update(overrides)
    params, _ = params_from_dict(doc)
    return params


class TestValidate:
    def test_valid_params_pass(self):
        report = validate(make_params())
        assert report.passed
        assert report.violations == ()

    def test_b2_zero_fails_with_named_constraint(self):
        report = validate(make_params(b2=0.0))
        assert not report.passed
        assert "b2 > 0" in report.violations

    def test_strongly_indefinite_corr_fails_psd(self):
        # determinant by cofactor expansion (independent of the eigenvalue
        # check inside validate): det = -3.8809 < 0, so not PSD
        m = [[1.0, 0.99, 0.99], [0.99, 1.0, -0.99], [0.99, -0.99, 1.0]]
        a, b, c = m[0]
        d, e, f = m[1]
        g, h, i = m[2]
        det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
        assert det < 0
        params = ModelParams(
            internal=make_params().internal,
            external=make_params().external,
            s0=1.0,
            corr=CorrelationSpec.from_array(m),
        )
        report = validate(params)
        assert not report.passed
        assert "positive semi-definite" in report.violations

    def test_alpha_out_of_range(self):
        report = validate(make_params(alpha2=0.25))
        assert "alpha2 in [1/2, 1]" in report.violations

    def test_total_on_random_finite_junk(self):
        rng = np.random.default_rng(99)
        for _ in range(300):
            vals = rng.uniform(-10, 10, size=11)
            params = ModelParams(
                internal=InternalParams(*vals[:5]),
                external=ExternalParams(*vals[5:10]),
                s0=vals[10],
                corr=CorrelationSpec.from_array(rng.uniform(-2, 2, (3, 3))),
            )
            report = validate(params)  # must never raise
            assert isinstance(report.passed, bool)


class TestCholesky:
    def test_identity(self):
        L = cholesky_factor(CorrelationSpec())
        assert np.array_equal(L, np.eye(3))

    def test_hand_solved_single_pair(self):
        # rho(W, B) = 0.5, others 0: row 2 is (0, 0.5, sqrt(0.75))
        corr = CorrelationSpec.pairwise(rho_WB=0.5)
        L = cholesky_factor(corr)
        assert L[2][1] == pytest.approx(0.5, abs=1e-15)
        assert L[2][2] == pytest.approx(np.sqrt(0.75), abs=1e-15)
        assert np.max(np.abs(L @ L.T - corr.as_array())) < 1e-12

    def test_rank_one_perfect_correlation(self):
        corr = CorrelationSpec.pairwise(1.0, 1.0, 1.0)
        L = cholesky_factor(corr)
        assert np.all(L[:, 1] == 0.0)
        assert np.all(L[:, 2] == 0.0)
        assert np.max(np.abs(L @ L.T - corr.as_array())) < 1e-12

    def test_factor_reproduces_matrix_on_random_psd_draws(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = rng.standard_normal((3, 3))
            cov = a @ a.T + 1e-6 * np.eye(3)
            dd = np.sqrt(np.diag(cov))
            corr = CorrelationSpec.from_array(cov / np.outer(dd, dd))
            L = cholesky_factor(corr)
            assert np.max(np.abs(L @ L.T - corr.as_array())) < 1e-10

    def test_not_psd_raises(self):
        with pytest.raises(NotPSD):
            cholesky_factor(CorrelationSpec.pairwise(0.99, 0.99, -0.99))


class TestGridAndReflection:
    def test_grid_dt(self):
        g = GridSpec(t_end=2.0, n_steps=400)
        assert g.dt == pytest.approx(0.005)
        assert len(g.times()) == 401

    def test_reflection_needs_room_below_y0(self):
        p = make_params().internal
        assert ReflectionSpec(m=0.5).violations(p) == []
        assert "m < y0" in ReflectionSpec(m=1.5).violations(p)
        assert "m > 0" in ReflectionSpec(m=0.0).violations(p)


class TestJsonSchema:
    def test_round_trip(self):
        params = make_params()
        refl = ReflectionSpec(m=0.25)
        doc = params_to_dict(params, refl)
        params2, refl2 = params_from_dict(doc)
        assert params2 == params
        assert refl2 == refl

    def test_missing_key_reported(self):
        with pytest.raises(KeyError, match="b2"):
            params_from_dict({"a2": 1.0})

    def test_corr_defaults_to_identity(self):
        params = make_params()
        assert np.array_equal(params.corr.as_array(), np.eye(3))
