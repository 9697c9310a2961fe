"""Photon delay-time statistics of a resonantly driven, decaying two-level atom.

Two independent routes produce delay samples:

* :func:`sample_delays_analytic` inverts a tabulated CDF of the closed-form
  waiting-time density :func:`delay_pdf`;
* :func:`sample_delays_jump` unfolds the master equation into pure-state
  quantum jumps, integrating the non-Hermitian no-jump evolution with RK4.

Times are in units of ``1/gamma`` and rates in units of ``gamma``.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np

from ._rng import make_rng
from .exceptions import DomainError, NumericalDiagnostic

__all__ = [
    "TlsParams",
    "Trajectory",
    "QubitAmplitudes",
    "CdfTable",
    "delay_pdf",
    "delay_pdf_grid",
    "delay_cdf_table",
    "sample_delays_analytic",
    "sample_delays_jump",
    "no_jump_evolution",
    "add_time_jitter",
    "add_label_noise",
]

IMAG_TOL = 1e-10
NEG_TOL = 1e-12


@dataclass(frozen=True)
class TlsParams:
    """Detuning, Rabi frequency and decay rate of the driven two-level system."""

    delta: float
    omega: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("delta", "omega", "gamma"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.gamma <= 0:
            raise DomainError(f"gamma must be positive, got {self.gamma!r}")

    @property
    def tau_max(self):
        """Default histogram / table support, ``100 / gamma``."""
        return 100.0 / self.gamma


@dataclass
class Trajectory:
    """Delays between consecutive photon detections for one measurement record."""

    delays: np.ndarray
    true_delta: float = None
    gen: str = "analytic"
    seed: int = None
    jitter: float = 0.0

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=np.float64).reshape(-1)

    def __len__(self):
        return self.delays.size

    @property
    def noiseless(self):
        return self.jitter == 0.0

    def concat(self, other):
        return replace(self, delays=np.concatenate([self.delays, other.delays]))


@dataclass
class QubitAmplitudes:
    """Unnormalized amplitudes of |g> and |e> between two jumps."""

    c_g: complex = 1.0 + 0.0j
    c_e: complex = 0.0 + 0.0j

    @property
    def norm2(self):
        return abs(self.c_g) ** 2 + abs(self.c_e) ** 2


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite parameter {v!r}")


def _pdf_coefficients(delta, omega, gamma):
    """Prefactor and the two complex decay constants k_plus, k_minus.

    w(tau) = pref * exp(-gamma tau / 2) * (cosh(k_plus tau) - cosh(k_minus tau))
    """
    delta = np.asarray(delta, dtype=np.float64)
    s = gamma**2 + 4.0 * (delta**2 + 4.0 * omega**2)
    r = np.sqrt(np.maximum(s**2 - 64.0 * gamma**2 * omega**2, 0.0))
    base = gamma**2 - 4.0 * (delta**2 + 4.0 * omega**2)
    k_plus = np.sqrt((base + r).astype(np.complex128)) / (2.0 * math.sqrt(2.0))
    k_minus = np.sqrt((base - r).astype(np.complex128)) / (2.0 * math.sqrt(2.0))
    return s, r, k_plus, k_minus


def _damped_cosh(k, tau, gamma):
    # exp(-gamma tau / 2) cosh(k tau) without overflow; |Re k| < gamma / 2
    half = 0.5 * gamma
    return 0.5 * (np.exp((k - half) * tau) + np.exp((-k - half) * tau))


def _damped_sinhc(k, tau, gamma):
    # exp(-gamma tau / 2) sinh(k tau) / k with the k -> 0 limit tau exp(-gamma tau / 2)
    half = 0.5 * gamma
    small = np.abs(k) < 1e-12
    k_safe = np.where(small, 1j, k)
    ratio = 0.5 * (np.exp((k_safe - half) * tau) - np.exp((-k_safe - half) * tau)) / k_safe
    return np.where(small, tau * np.exp(-half * tau) + 0j, ratio)


def _pdf_from_coefficients(tau, s, r, k_plus, k_minus, omega, gamma):
    tau = np.asarray(tau, dtype=np.float64)
    degenerate = r <= 1e-9 * s
    r_safe = np.where(degenerate, 1.0, r)
    two_term = (8.0 * gamma * omega**2 / r_safe) * (
        _damped_cosh(k_plus, tau, gamma) - _damped_cosh(k_minus, tau, gamma)
    )
    # R -> 0 (Delta = 0, Omega = gamma / 4): both roots merge; take the derivative limit.
    k_mid = 0.5 * (k_plus + k_minus)
    limit = gamma * omega**2 * tau * _damped_sinhc(k_mid, tau, gamma)
    w = np.where(degenerate, limit, two_term)
    imag = np.max(np.abs(w.imag)) if w.size else 0.0
    if imag > IMAG_TOL:
        raise NumericalDiagnostic(f"delay density has imaginary residue {imag:.3e}")
    w = w.real
    if w.size and np.min(w) < -NEG_TOL:
        raise NumericalDiagnostic(f"delay density is negative ({np.min(w):.3e})")
    return np.maximum(w, 0.0)


def delay_pdf(tau, p):
    """Waiting-time density w(tau; delta, omega, gamma) between photon detections.

    Both root branches are evaluated in complex arithmetic: where the radicand
    is negative the hyperbolic cosine turns into an ordinary cosine, so no case
    split is needed.

    Parameters
    ----------
    tau : float or array_like
        Delay(s), ``tau >= 0``.
    p : TlsParams

    Returns
    -------
    float or ndarray
        Density in units of ``gamma``, same shape as ``tau``.
    """
    _check_finite(p.delta, p.omega, p.gamma)
    tau_arr = np.asarray(tau, dtype=np.float64)
    coeffs = _pdf_coefficients(p.delta, p.omega, p.gamma)
    w = _pdf_from_coefficients(tau_arr, *coeffs, p.omega, p.gamma)
    return float(w) if np.ndim(tau) == 0 else w


def delay_pdf_grid(tau, delta, omega=1.0, gamma=1.0):
    """Density on the outer product ``delta[:, None] x tau[None, :]``."""
    delta = np.asarray(delta, dtype=np.float64).reshape(-1, 1)
    tau = np.asarray(tau, dtype=np.float64).reshape(1, -1)
    _check_finite(delta, omega, gamma)
    s, r, kp, km = _pdf_coefficients(delta, omega, gamma)
    return _pdf_from_coefficients(tau, s, r, kp, km, omega, gamma)


@dataclass(frozen=True)
class CdfTable:
    tau: np.ndarray
    cdf: np.ndarray

    @property
    def mass(self):
        return float(self.cdf[-1])


def delay_cdf_table(p, tau_max=None, n_points=100_000, tol=1e-4):
    """Cumulative trapezoid integral of :func:`delay_pdf` on a uniform grid.

    The returned CDF is not renormalized; ``table.mass`` is the captured
    probability. Mass lost beyond ``tau_max`` is of order 1e-6 for
    ``tau_max = 100/gamma`` in the experiment range.

    Raises
    ------
    NumericalDiagnostic
        If the captured mass differs from 1 by more than ``tol`` (grid too
        coarse or support too short).
    """
    tau_max = p.tau_max if tau_max is None else float(tau_max)
    if not tau_max > 0:
        raise ValueError("tau_max must be positive")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    return _cached_table(p.delta, p.omega, p.gamma, tau_max, int(n_points), float(tol))


@lru_cache(maxsize=64)
def _cached_table(delta, omega, gamma, tau_max, n_points, tol):
    tau = np.linspace(0.0, tau_max, n_points)
    w = delay_pdf(tau, TlsParams(delta, omega, gamma))
    cdf = np.empty_like(tau)
    cdf[0] = 0.0
    np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(tau), out=cdf[1:])
    mass = cdf[-1]
    if not abs(mass - 1.0) <= tol:
        raise NumericalDiagnostic(
            f"tabulated CDF reaches mass {mass:.8f} (|1 - mass| > {tol:g}); "
            f"increase n_points or tau_max"
        )
    tau.setflags(write=False)
    cdf.setflags(write=False)
    return CdfTable(tau, cdf)


def sample_from_table(table, u):
    """Inverse-CDF lookup with linear interpolation; tail mass is renormalized away."""
    return np.interp(np.asarray(u) * table.mass, table.cdf, table.tau)


def sample_delays_analytic(p, n, rng_seed, tau_max=None, n_points=100_000):
    """Draw ``n`` i.i.d. delays by inverting the tabulated CDF.

    Deterministic given ``rng_seed`` (an int seed or a ``numpy`` Generator).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    if n == 0:
        return Trajectory(np.empty(0), true_delta=p.delta, gen="analytic", seed=seed)
    rng = make_rng(rng_seed)
    table = delay_cdf_table(p, tau_max=tau_max, n_points=n_points)
    delays = sample_from_table(table, rng.random(n))
    return Trajectory(delays, true_delta=p.delta, gen="analytic", seed=seed)


def effective_hamiltonian(p):
    """H_eff = delta |e><e| + omega (sigma + sigma^dag) - i gamma/2 |e><e|, basis (g, e)."""
    return np.array(
        [[0.0, p.omega], [p.omega, p.delta - 0.5j * p.gamma]],
        dtype=np.complex128,
    )


def _rk4_propagator(p, dt):
    # One RK4 step of dc/dt = -i H_eff c is the degree-4 Taylor polynomial of exp(-i H_eff dt).
    a = -1j * effective_hamiltonian(p) * dt
    eye = np.eye(2, dtype=np.complex128)
    a2 = a @ a
    a3 = a2 @ a
    return eye + a + a2 / 2.0 + a3 / 6.0 + (a3 @ a) / 24.0


def no_jump_evolution(p, dt, norm_floor, max_steps=50_000_000):
    """Squared norm of the no-jump state after each RK4 step, starting from |g>.

    Integration stops once the squared norm falls to ``norm_floor``.

    Returns
    -------
    norms : ndarray
        ``norms[k]`` is the squared norm at ``t = k * dt``; ``norms[0] == 1``.
    """
    prop = _rk4_propagator(p, dt)
    (p00, p01), (p10, p11) = prop.tolist()
    amps = QubitAmplitudes()
    c_g, c_e = amps.c_g, amps.c_e
    norms = [1.0]
    prev = 1.0
    while prev > norm_floor:
        c_g, c_e = p00 * c_g + p01 * c_e, p10 * c_g + p11 * c_e
        n2 = c_g.real**2 + c_g.imag**2 + c_e.real**2 + c_e.imag**2
        if n2 < 0.9 * prev or n2 > prev * (1.0 + 1e-9):
            raise NumericalDiagnostic(
                f"step dt={dt:g} too large: squared norm went {prev:.6g} -> {n2:.6g} in one step"
            )
        norms.append(n2)
        prev = n2
        if len(norms) > max_steps:
            raise NumericalDiagnostic("no-jump evolution did not decay within max_steps")
    return np.minimum.accumulate(np.asarray(norms))


def sample_delays_jump(p, n, rng_seed, dt=None):
    """Draw ``n`` delays by quantum-jump unfolding of the master equation.

    Each waiting period starts in |g>, the amplitudes evolve under H_eff and a
    photon is recorded where the squared norm crosses a fresh ``u ~ U(0, 1)``
    (linear interpolation between steps); the atom is then reset to |g>.
    Because every period restarts from the same state, the norm curve is
    integrated once per call and shared by all periods.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    dt = 0.005 / p.gamma if dt is None else float(dt)
    if not 0 < dt <= 0.01 / p.gamma * (1 + 1e-12):
        raise ValueError(f"dt must lie in (0, 0.01/gamma], got {dt!r}")
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    if n == 0:
        return Trajectory(np.empty(0), true_delta=p.delta, gen="jump", seed=seed)
    rng = make_rng(rng_seed)
    u = rng.random(n)
    u = np.where(u > 0.0, u, np.nextafter(0.0, 1.0))
    norms = no_jump_evolution(p, dt, norm_floor=float(u.min()))
    # first step k with norms[k] <= u; norms is non-increasing
    k = np.searchsorted(-norms, -u, side="left")
    k = np.clip(k, 1, norms.size - 1)
    hi, lo = norms[k - 1], norms[k]
    span = hi - lo
    frac = np.where(span > 0, (hi - u) / np.where(span > 0, span, 1.0), 0.0)
    delays = (k - 1 + np.clip(frac, 0.0, 1.0)) * dt
    return Trajectory(delays, true_delta=p.delta, gen="jump", seed=seed)


def add_time_jitter(t, sigma_tau, rng_seed):
    """Shift every delay by an independent N(0, sigma_tau) draw (no clamping)."""
    if sigma_tau < 0:
        raise ValueError("sigma_tau must be non-negative")
    if sigma_tau == 0:
        return replace(t, delays=t.delays.copy())
    rng = make_rng(rng_seed)
    noisy = t.delays + rng.normal(0.0, sigma_tau, size=t.delays.shape)
    return replace(t, delays=noisy, jitter=float(np.hypot(t.jitter, sigma_tau)))


def add_label_noise(delta, sigma_y, rng_seed):
    """Return ``delta + N(0, sigma_y)``; labels may leave the prior support."""
    if sigma_y < 0:
        raise ValueError("sigma_y must be non-negative")
    if sigma_y == 0:
        return delta
    rng = make_rng(rng_seed)
    if np.ndim(delta) == 0:
        return float(delta + rng.normal(0.0, sigma_y))
    delta = np.asarray(delta, dtype=np.float64)
    return delta + rng.normal(0.0, sigma_y, size=delta.shape)
