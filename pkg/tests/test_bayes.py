import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from tlsnet.bayes import (
    FISHER_FLOOR,
    GridBayesEstimator,
    PosteriorGrid,
    _posterior_from_loglik,
    biased_crb,
    fisher_information,
    grid_log_likelihood,
    grid_posterior,
    log_likelihood,
    posterior_mean,
    score_variance_mc,
)
from tlsnet.exceptions import NumericalDiagnostic
from tlsnet.physics import TlsParams, Trajectory, delay_pdf, sample_delays_analytic


class TestLikelihood:
    def test_empty(self):
        assert log_likelihood(Trajectory(np.empty(0)), TlsParams(1.0)) == 0.0

    def test_single_delay(self):
        assert log_likelihood(Trajectory([1.0]), TlsParams(0.0)) == pytest.approx(math.log(0.4391601408), abs=1e-9)
        assert log_likelihood(Trajectory([1.0]), TlsParams(0.0)) == pytest.approx(-0.8228, abs=1e-4)

    def test_concatenation_adds(self):
        p = TlsParams(0.8)
        a = sample_delays_analytic(p, 30, 1)
        b = sample_delays_analytic(p, 17, 2)
        assert log_likelihood(a.concat(b), p) == pytest.approx(log_likelihood(a, p) + log_likelihood(b, p), rel=1e-12)

    def test_floor_at_zero_density(self):
        # tau = 0 and negative (jittered) delays have zero density
        assert log_likelihood(Trajectory([0.0]), TlsParams(1.0)) == pytest.approx(math.log(1e-300))
        assert log_likelihood(Trajectory([-0.3]), TlsParams(1.0)) == pytest.approx(math.log(1e-300))

    def test_grid_matches_scalar(self):
        X = [sample_delays_analytic(TlsParams(d), n, s).delays for d, n, s in [(0.3, 5, 1), (1.2, 0, 2), (2.0, 9, 3)]]
        grid = np.array([0.1, 0.9, 1.7])
        ll = grid_log_likelihood(X, grid, chunk_size=4)
        for i, row in enumerate(X):
            for j, d in enumerate(grid):
                assert ll[i, j] == pytest.approx(log_likelihood(row, TlsParams(d)), rel=1e-12, abs=1e-12)


class TestPosterior:
    def test_empty_is_prior(self):
        g = grid_posterior(Trajectory(np.empty(0)))
        np.testing.assert_allclose(g.density, 1 / 2.1, rtol=1e-12)
        assert g.mean == pytest.approx(1.05, abs=1e-12)
        assert g.grid.size == 500 and g.grid[0] == 0.0 and g.grid[-1] == 2.1

    @pytest.mark.parametrize("delta,n", [(0.2, 48), (0.9, 480), (2.0, 2000)])
    def test_normalized(self, delta, n):
        g = grid_posterior(sample_delays_analytic(TlsParams(delta), n, 7))
        assert np.all(g.density >= 0)
        assert g.integral() == pytest.approx(1.0, abs=1e-8)

    def test_permutation_invariant(self):
        t = sample_delays_analytic(TlsParams(1.1), 48, 3).delays
        a = grid_posterior(t)
        b = grid_posterior(t[::-1])
        np.testing.assert_allclose(a.density, b.density, rtol=1e-12)

    def test_spike_mean(self):
        grid = np.linspace(0, 2.1, 500)
        k = np.argmin(np.abs(grid - 0.7))
        density = np.zeros(500)
        density[k] = 1.0 / (grid[1] - grid[0])
        assert posterior_mean(PosteriorGrid(grid, density, 0.0)) == pytest.approx(0.7, abs=grid[1] - grid[0])

    def test_mean_matches_sampling(self):
        g = grid_posterior(sample_delays_analytic(TlsParams(0.6), 48, 11))
        w = np.diff(g.grid)
        w = np.r_[w, 0] * 0.5 + np.r_[0, w] * 0.5
        prob = w * g.density / np.sum(w * g.density)
        draws = np.random.default_rng(0).choice(g.grid, size=1_000_000, p=prob)
        se = draws.std() / math.sqrt(draws.size)
        assert abs(posterior_mean(g) - draws.mean()) < 3 * se

    def test_mean_inside_support(self):
        g = grid_posterior(sample_delays_analytic(TlsParams(2.1), 500, 1))
        assert 0.0 <= g.mean <= 2.1

    def test_vanished_normalization(self):
        with pytest.raises(NumericalDiagnostic):
            _posterior_from_loglik(np.full((1, 5), -np.inf), np.linspace(0, 1, 5))

    def test_bad_prior(self):
        with pytest.raises(ValueError):
            grid_posterior(Trajectory([1.0]), prior_lo=1.0, prior_hi=1.0)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0.0, 60.0), min_size=0, max_size=40))
    def test_property_normalized(self, delays):
        g = grid_posterior(np.array(delays, dtype=float), n_grid=101)
        assert g.integral() == pytest.approx(1.0, abs=1e-8)
        assert 0.0 <= g.mean <= 2.1


class TestFisher:
    def test_resonance(self):
        assert fisher_information(TlsParams(0.0)) == pytest.approx(0.0, abs=1e-6)

    def test_even(self):
        assert fisher_information(TlsParams(0.8)) == pytest.approx(fisher_information(TlsParams(-0.8)), rel=1e-9)

    def test_frozen_values(self):
        # quadrature oracle values at omega = gamma = 1
        got = [fisher_information(TlsParams(d)) for d in (0.5, 1.0, 2.0)]
        np.testing.assert_allclose(got, [0.596, 0.8843, 0.765], rtol=2e-3)

    def test_matches_score_variance(self):
        p = TlsParams(1.0)
        mc, se = score_variance_mc(p, 1_000_000, 3)
        assert se / mc < 0.01
        assert fisher_information(p) == pytest.approx(mc, rel=0.02)

    def test_nonnegative(self):
        for d in np.linspace(0, 2.1, 8):
            assert fisher_information(TlsParams(d, 1.3)) >= 0.0


class TestBiasedCrb:
    def test_zero_bias(self):
        d = np.linspace(0.1, 2.0, 5)
        f = np.array([0.1, 0.5, 0.8, 0.9, 0.7])
        c = biased_crb(d, np.zeros(5), f, 48)
        np.testing.assert_allclose(c.bound, 1 / (48 * f))
        np.testing.assert_allclose(c.bias_slope, 0.0)

    def test_constant_estimator(self):
        d = np.linspace(0.0, 2.1, 6)
        c = biased_crb(d, 1.0 - d, np.full(6, 0.5), 48)
        np.testing.assert_allclose(c.bound, 0.0, atol=1e-15)

    def test_slope_central_and_one_sided(self):
        d = np.array([0.0, 1.0, 2.0, 3.0])
        bias = d**2
        c = biased_crb(d, bias, np.ones(4), 1)
        np.testing.assert_allclose(c.bias_slope, [1.0, 2.0, 4.0, 5.0])

    def test_undefined_points(self):
        d = np.linspace(0, 1, 3)
        c = biased_crb(d, np.zeros(3), np.array([0.0, FISHER_FLOOR / 2, 1.0]), 48)
        assert np.isnan(c.bound[0]) and np.isnan(c.bound[1])
        assert list(c.defined) == [False, False, True]

    def test_errors(self):
        with pytest.raises(ValueError):
            biased_crb(np.arange(3.0), np.zeros(2), np.ones(3), 48)
        with pytest.raises(ValueError):
            biased_crb(np.arange(3.0), np.zeros(3), np.ones(3), 0)


class TestGridBayesEstimator:
    def test_matches_posterior_mean(self):
        X = [sample_delays_analytic(TlsParams(d), 48, i).delays for i, d in enumerate([0.2, 1.0, 1.9])]
        est = GridBayesEstimator().fit()
        pred = est.predict(X)
        want = [grid_posterior(x).mean for x in X]
        np.testing.assert_allclose(pred, want, rtol=1e-12)

    def test_density_rows_normalized(self):
        X = np.stack([sample_delays_analytic(TlsParams(0.5), 48, i).delays for i in range(4)])
        est = GridBayesEstimator(n_grid=200).fit(X)
        dens = est.posterior_density(X)
        assert dens.shape == (4, 200)
        assert np.allclose(np.trapezoid(dens, est.grid_, axis=1), 1.0, atol=1e-8)

    def test_sklearn_api(self):
        est = GridBayesEstimator(n_grid=50, omega=1.2)
        assert clone(est).get_params()["omega"] == 1.2
        with pytest.raises(Exception):
            est.predict(np.ones((1, 3)))

    def test_ragged_records(self):
        est = GridBayesEstimator().fit()
        out = est.predict([np.array([1.0, 2.0]), np.array([]), np.array([0.5])])
        assert out[1] == pytest.approx(1.05)
