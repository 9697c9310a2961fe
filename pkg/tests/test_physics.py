import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from tlsnet._rng import make_rng
from tlsnet.exceptions import DomainError, NumericalDiagnostic
from tlsnet.physics import (
    TlsParams,
    Trajectory,
    add_label_noise,
    add_time_jitter,
    delay_cdf_table,
    delay_pdf,
    delay_pdf_grid,
    no_jump_evolution,
    sample_delays_analytic,
    sample_delays_jump,
)


def resonant_density(tau):
    # closed form at delta=0, omega=1, gamma=1
    return (8.0 / 15.0) * math.exp(-tau / 2.0) * (1.0 - math.cos(tau * math.sqrt(30.0 / 8.0)))


def reference_density(tau, delta, omega, gamma):
    """Independent scalar evaluation with cmath."""
    a = gamma**2 + 4 * (delta**2 + 4 * omega**2)
    r = cmath.sqrt(a**2 - 64 * gamma**2 * omega**2)
    total = 0
    for zeta in (1, -1):
        arg = tau * cmath.sqrt(gamma**2 - 4 * (delta**2 + 4 * omega**2) + zeta * r) / (2 * math.sqrt(2))
        total += zeta * cmath.cosh(arg)
    return (8 * gamma * omega**2 / r * cmath.exp(-gamma * tau / 2) * total).real


def ks_to_table(x, table):
    cdf = lambda t: np.interp(t, table.tau, table.cdf / table.mass)
    return stats.kstest(x, cdf).statistic


class TestDelayPdf:
    def test_zero_delay(self):
        for d, w in [(0.0, 1.0), (1.3, 0.5), (2.1, 2.0)]:
            assert delay_pdf(0.0, TlsParams(d, w)) == 0.0

    def test_resonant_value(self):
        value = delay_pdf(1.0, TlsParams(0.0, 1.0, 1.0))
        assert value == pytest.approx(resonant_density(1.0), rel=1e-12)
        assert value == pytest.approx(0.4392, abs=5e-4)

    @pytest.mark.parametrize("delta,omega,gamma", [(0.0, 1.0, 1.0), (0.7, 1.0, 1.0), (2.1, 0.5, 1.0), (1.0, 2.0, 0.5)])
    def test_matches_scalar_reference(self, delta, omega, gamma):
        tau = np.linspace(0.0, 30.0, 61)
        got = delay_pdf(tau, TlsParams(delta, omega, gamma))
        want = [reference_density(t, delta, omega, gamma) for t in tau]
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-14)

    def test_resonant_closed_form_on_grid(self):
        tau = np.linspace(0.0, 40.0, 401)
        want = [resonant_density(t) for t in tau]
        np.testing.assert_allclose(delay_pdf(tau, TlsParams(0.0)), want, rtol=1e-10, atol=1e-15)

    def test_detuning_sign(self):
        assert delay_pdf(2.0, TlsParams(0.7)) == delay_pdf(2.0, TlsParams(-0.7))

    def test_degenerate_branch_point(self):
        # R = 0 at delta = 0, omega = gamma / 4; compare against neighbours
        tau = np.linspace(0.0, 50.0, 201)
        mid = delay_pdf(tau, TlsParams(0.0, 0.25, 1.0))
        lo = delay_pdf(tau, TlsParams(0.0, 0.25 - 1e-6, 1.0))
        hi = delay_pdf(tau, TlsParams(0.0, 0.25 + 1e-6, 1.0))
        assert np.all(np.isfinite(mid))
        np.testing.assert_allclose(mid, 0.5 * (lo + hi), atol=1e-6)
        assert integrate.trapezoid(delay_pdf(np.linspace(0, 200, 200001), TlsParams(0.0, 0.25)), dx=0.001) == pytest.approx(1.0, abs=1e-5)

    def test_scalar_in_scalar_out(self):
        assert isinstance(delay_pdf(1.0, TlsParams(0.3)), float)
        assert delay_pdf(np.array([1.0, 2.0]), TlsParams(0.3)).shape == (2,)

    def test_grid_matches_pointwise(self):
        tau = np.linspace(0, 20, 50)
        deltas = np.array([0.0, 0.5, 2.1])
        grid = delay_pdf_grid(tau, deltas, 1.2, 0.9)
        for row, d in zip(grid, deltas):
            np.testing.assert_allclose(row, delay_pdf(tau, TlsParams(d, 1.2, 0.9)), rtol=1e-13, atol=1e-16)

    @pytest.mark.parametrize("bad", [dict(delta=np.nan), dict(delta=0.0, omega=np.inf), dict(delta=0.0, gamma=0.0), dict(delta=0.0, gamma=-1.0)])
    def test_domain_errors(self, bad):
        with pytest.raises(DomainError):
            TlsParams(**bad)

    def test_nonnegative_on_parameter_grid(self):
        tau = np.linspace(0.0, 100.0, 100_000)
        for omega in np.linspace(0.5, 2.0, 20):
            w = delay_pdf_grid(tau, np.linspace(0.0, 2.1, 20), omega, 1.0)
            assert np.all(w >= 0.0)

    def test_truncated_mass_for_moderate_drive(self):
        tau = np.linspace(0.0, 100.0, 100_000)
        for omega in np.linspace(0.8, 2.0, 16):
            mass = integrate.trapezoid(delay_pdf_grid(tau, np.linspace(0.0, 2.1, 20), omega, 1.0), tau, axis=1)
            assert np.all(mass >= 1 - 1e-4) and np.all(mass <= 1 + 1e-8)

    @pytest.mark.parametrize("omega", [0.5, 0.6, 0.75])
    def test_weak_drive_tail_is_physical(self, omega):
        # slow emission: part of the mass lies beyond 100/gamma, the full integral is still 1
        p = TlsParams(2.1, omega)
        head, _ = integrate.quad(lambda t: delay_pdf(t, p), 0, 100, limit=2000)
        tail, _ = integrate.quad(lambda t: delay_pdf(t, p), 100, np.inf, limit=2000)
        assert head + tail == pytest.approx(1.0, abs=1e-8)
        assert tail > 1e-5

    def test_no_overflow_at_long_delays(self):
        with np.errstate(over="raise", invalid="raise"):
            w = delay_pdf(np.array([1e3, 1e5]), TlsParams(2.1, 0.5))
            assert delay_pdf(1e4, TlsParams(0.0, 0.25)) == 0.0
        assert np.all(np.isfinite(w)) and np.all(w >= 0)

    @settings(max_examples=60, deadline=None)
    @given(
        tau=st.floats(0.0, 100.0),
        delta=st.floats(-3.0, 3.0),
        omega=st.floats(0.05, 3.0),
        gamma=st.floats(0.2, 3.0),
    )
    def test_property_even_and_nonnegative(self, tau, delta, omega, gamma):
        w = delay_pdf(tau, TlsParams(delta, omega, gamma))
        assert w >= 0.0
        assert w == delay_pdf(tau, TlsParams(-delta, omega, gamma))


class TestCdfTable:
    def test_resonant_normalization(self):
        table = delay_cdf_table(TlsParams(0.0), tau_max=100.0, n_points=100_000)
        assert table.cdf[0] == 0.0
        assert np.all(np.diff(table.cdf) >= 0.0)
        assert table.mass == pytest.approx(1.0, abs=1e-6)
        exact, _ = integrate.quad(resonant_density, 0, 100, limit=500)
        assert exact == pytest.approx(1.0, abs=1e-9)

    def test_mean_delay_by_quadrature(self):
        mean, _ = integrate.quad(lambda t: t * resonant_density(t), 0, 200, limit=500)
        assert mean == pytest.approx(2.25, abs=1e-8)

    def test_coarse_grid_raises(self):
        with pytest.raises(NumericalDiagnostic, match="mass"):
            delay_cdf_table(TlsParams(1.0), tau_max=3.0, n_points=100)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            delay_cdf_table(TlsParams(1.0), tau_max=0.0)
        with pytest.raises(ValueError):
            delay_cdf_table(TlsParams(1.0), n_points=1)


class TestAnalyticSampler:
    def test_empty(self):
        t = sample_delays_analytic(TlsParams(1.0), 0, 3)
        assert len(t) == 0

    def test_mean_delay(self):
        t = sample_delays_analytic(TlsParams(0.0), 100_000, 11)
        assert t.delays.mean() == pytest.approx(2.25, abs=0.02)

    def test_ks_against_table(self):
        p = TlsParams(1.0)
        t = sample_delays_analytic(p, 100_000, 5)
        assert ks_to_table(t.delays, delay_cdf_table(p)) < 0.01

    def test_deterministic(self):
        a = sample_delays_analytic(TlsParams(0.4), 500, 99).delays
        b = sample_delays_analytic(TlsParams(0.4), 500, 99).delays
        assert a.tobytes() == b.tobytes()
        assert np.all(a >= 0)


class TestJumpSampler:
    @pytest.mark.parametrize("delta", [0.0, 1.0, 2.0])
    def test_agrees_with_analytic(self, delta):
        p = TlsParams(delta)
        jump = sample_delays_jump(p, 50_000, 21, dt=0.005).delays
        analytic = sample_delays_analytic(p, 50_000, 22).delays
        assert stats.ks_2samp(jump, analytic).statistic < 0.02
        assert ks_to_table(jump, delay_cdf_table(p)) < 0.02

    def test_norm_at_jump_equals_draw(self):
        p, dt, seed = TlsParams(0.6), 0.005, 4
        u = make_rng(seed).random(200)
        t = sample_delays_jump(p, 200, seed, dt=dt)
        norms = no_jump_evolution(p, dt, norm_floor=u.min())
        at_jump = np.interp(t.delays, np.arange(norms.size) * dt, norms)
        np.testing.assert_allclose(at_jump, u, atol=1e-3)

    def test_norm_monotone(self):
        norms = no_jump_evolution(TlsParams(1.5, 2.0), 0.005, 1e-6)
        assert norms[0] == 1.0
        assert np.all(np.diff(norms) <= 0) and norms[-1] > 0

    def test_step_limits(self):
        with pytest.raises(ValueError):
            sample_delays_jump(TlsParams(0.0), 10, 0, dt=0.02)
        with pytest.raises(NumericalDiagnostic):
            no_jump_evolution(TlsParams(0.0, 1.0, 1.0), 0.5, 1e-3)

    def test_empty_and_deterministic(self):
        assert len(sample_delays_jump(TlsParams(0.0), 0, 1)) == 0
        a = sample_delays_jump(TlsParams(0.3), 100, 8).delays
        b = sample_delays_jump(TlsParams(0.3), 100, 8).delays
        assert a.tobytes() == b.tobytes()


class TestNoise:
    def test_zero_jitter_identity(self):
        t = Trajectory(np.array([0.5, 1.0, 3.0]))
        out = add_time_jitter(t, 0.0, 1)
        np.testing.assert_array_equal(out.delays, t.delays)
        assert out.noiseless

    def test_jitter_statistics(self):
        base = np.full(100_000, 5.0)
        out = add_time_jitter(Trajectory(base), 0.76, 2).delays - base
        assert abs(out.mean()) < 3 * 0.76 / math.sqrt(100_000)
        assert out.std() == pytest.approx(0.76, abs=0.01)

    def test_jitter_not_clamped(self):
        out = add_time_jitter(Trajectory(np.zeros(1000)), 1.0, 3)
        assert out.delays.min() < 0
        assert not out.noiseless

    def test_label_noise(self):
        assert add_label_noise(1.3, 0.0, 1) == 1.3
        y = np.full(100_000, 1.0)
        noisy = add_label_noise(y, 0.52, 5)
        assert (noisy - y).std() == pytest.approx(0.52, abs=0.01)
        assert noisy.min() < 0.0 and noisy.max() > 2.1

    def test_negative_scales_rejected(self):
        with pytest.raises(ValueError):
            add_time_jitter(Trajectory(np.ones(2)), -0.1, 0)
        with pytest.raises(ValueError):
            add_label_noise(1.0, -0.1, 0)
