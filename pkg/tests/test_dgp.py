"""Tests for the simulation data-generating process and its oracles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dnnate import (
    Dataset,
    DgpConfig,
    InvalidInputError,
    OraclePropensity,
    OracleRegressor,
    beta24_pdf,
    generate,
    m0,
    make_generator,
    true_ate,
    true_m,
    true_propensity,
)

PROPENSITY_MAX = 0.77734375  # attained at x3 = 1/4


class TestDgpConfig:
    def test_defaults(self):
        cfg = DgpConfig(n=10)
        assert (cfg.p, cfg.tau, cfg.noise_sd, cfg.seed) == (50, 1.0, 1.0, 0)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            DgpConfig(n=0)
        with pytest.raises(InvalidInputError):
            DgpConfig(n=5, p=2)
        with pytest.raises(InvalidInputError):
            DgpConfig(n=5, noise_sd=-0.1)


class TestControlSurface:
    def test_golden_point(self):
        assert m0(np.array([0.5, 0.25, 0.5])) == 0.75

    def test_vector_returns_float(self):
        out = m0(np.array([0.1, 0.2, 0.3, 0.9]))
        assert isinstance(out, float)
        assert_allclose(out, 0.01 + 0.2 + 0.09, rtol=1e-15)

    def test_batch_shape(self):
        x = np.random.default_rng(0).uniform(size=(7, 5))
        out = m0(x)
        assert out.shape == (7,)
        assert_allclose(out, x[:, 0] ** 2 + x[:, 1] + x[:, 2] ** 2)

    def test_extra_covariates_ignored(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(5, 10))
        y = x.copy()
        y[:, 3:] = rng.uniform(size=(5, 7))
        assert_array_equal(m0(x), m0(y))

    def test_needs_three_covariates(self):
        with pytest.raises(InvalidInputError):
            m0(np.zeros((4, 2)))


class TestBetaDensity:
    def test_boundary_zeros(self):
        assert beta24_pdf(0.0) == 0.0
        assert beta24_pdf(1.0) == 0.0

    def test_mode_golden(self):
        assert beta24_pdf(0.25) == 135.0 / 64.0

    def test_midpoint_golden(self):
        assert beta24_pdf(0.5) == 1.25

    def test_integrates_to_one(self):
        u = np.linspace(0.0, 1.0, 200001)
        assert_allclose(np.trapezoid(beta24_pdf(u), u), 1.0, atol=1e-9)

    def test_domain_check(self):
        with pytest.raises(InvalidInputError):
            beta24_pdf(-0.01)
        with pytest.raises(InvalidInputError):
            beta24_pdf(np.array([0.5, 1.01]))


class TestTruePropensity:
    def test_golden_extremes(self):
        x = np.zeros(3)
        assert true_propensity(x) == 0.25
        x[2] = 1.0
        assert true_propensity(x) == 0.25
        x[2] = 0.25
        assert true_propensity(x) == PROPENSITY_MAX

    def test_range_over_grid(self):
        x = np.zeros((100001, 3))
        x[:, 2] = np.linspace(0.0, 1.0, 100001)
        e = true_propensity(x)
        assert e.min() == 0.25
        assert e.max() == PROPENSITY_MAX
        assert np.all((e >= 0.25) & (e <= PROPENSITY_MAX))

    def test_depends_only_on_third_covariate(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(size=(20, 6))
        b = rng.uniform(size=(20, 6))
        b[:, 2] = a[:, 2]
        assert_array_equal(true_propensity(a), true_propensity(b))


class TestTrueOutcome:
    def test_additive_effect(self):
        x = np.array([0.5, 0.25, 0.5])
        assert true_m(x, 0.0) == 0.75
        assert true_m(x, 1.0) == 1.75
        assert true_m(x, 1.0, tau=2.5) == 3.25

    def test_binary_enforced(self):
        with pytest.raises(InvalidInputError):
            true_m(np.zeros(3), 0.5)

    def test_true_ate_is_tau(self):
        assert true_ate(DgpConfig(n=10, tau=3.5)) == 3.5


class TestGenerate:
    def test_returns_dataset(self):
        d = generate(DgpConfig(n=25, p=4, seed=3))
        assert isinstance(d, Dataset)
        assert (d.n, d.p) == (25, 4)

    def test_seed_determinism(self):
        a = generate(DgpConfig(n=50, p=5, seed=8))
        b = generate(DgpConfig(n=50, p=5, seed=8))
        assert_array_equal(a.x, b.x)
        assert_array_equal(a.t, b.t)
        assert_array_equal(a.y, b.y)
        c = generate(DgpConfig(n=50, p=5, seed=9))
        assert not np.array_equal(a.x, c.x)

    def test_draw_order_is_pinned(self):
        """Covariates, treatment uniforms, then noise, from one stream."""
        cfg = DgpConfig(n=40, p=4, seed=123, tau=2.0, noise_sd=0.5)
        d = generate(cfg)
        rng = make_generator(123)
        x = rng.random((40, 4))
        u = rng.random(40)
        eps = rng.standard_normal(40)
        assert_array_equal(d.x, x)
        assert_array_equal(d.t, (u < true_propensity(x)).astype(float))
        assert_allclose(d.y, m0(x) + 2.0 * d.t + 0.5 * eps, rtol=0, atol=0)

    def test_treated_fraction_matches_half(self):
        d = generate(DgpConfig(n=100_000, p=3, seed=44))
        assert abs(d.t.mean() - 0.5) < 0.005

    def test_outcome_level_matches_surface_mean(self):
        # E[m0] = 1/3 + 1/2 + 1/3 = 7/6
        d = generate(DgpConfig(n=100_000, p=3, seed=45))
        assert abs((d.y - d.t).mean() - 7.0 / 6.0) < 0.02

    def test_covariate_moments(self):
        d = generate(DgpConfig(n=100_000, p=5, seed=46))
        assert abs(d.x.mean() - 0.5) < 0.003
        assert abs(d.x.var() - 1.0 / 12.0) < 0.002

    def test_zero_noise_is_exact_surface(self):
        d = generate(DgpConfig(n=200, p=3, seed=5, noise_sd=0.0))
        assert_array_equal(d.y, true_m(d.x, d.t))

    def test_tau_shifts_treated_only(self):
        lo = generate(DgpConfig(n=500, p=3, seed=6, tau=0.0))
        hi = generate(DgpConfig(n=500, p=3, seed=6, tau=5.0))
        assert_array_equal(lo.x, hi.x)
        assert_array_equal(lo.t, hi.t)
        assert_allclose(hi.y - lo.y, 5.0 * lo.t, rtol=0, atol=1e-12)


class TestOracles:
    def test_regressor_matches_surface(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(size=(30, 4))
        m = OracleRegressor(tau=1.5)
        assert_allclose(m.predict(x, 1.0), m0(x) + 1.5)
        assert_allclose(m.predict(x, 0.0), m0(x))

    def test_regressor_contrast_is_constant(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(size=(30, 4))
        m = OracleRegressor(tau=2.0)
        assert_allclose(m.predict(x, 1.0) - m.predict(x, 0.0), np.full(30, 2.0))

    def test_regressor_accepts_single_row(self):
        m = OracleRegressor()
        out = m.predict(np.array([0.5, 0.25, 0.5]), 1.0)
        assert_allclose(out, [1.75])

    def test_propensity_matches_truth_and_reports_band(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(size=(30, 4))
        e = OraclePropensity()
        assert_allclose(e.predict(x), true_propensity(x))
        assert (e.clip_lo, e.clip_hi) == (0.25, PROPENSITY_MAX)
