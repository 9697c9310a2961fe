"""Smoothed-histogram input layer with a learnable Gaussian bandwidth.

Feature ``b`` is the raw kernel sum ``sum_i exp(-(tau_i - c_b)^2 / (2 phi^2))``
over the delays of one record, with bin centers ``c_b`` equally spaced on
``[tau_min, tau_max]``.  The bandwidth is stored as ``log(phi^2)``.

Kernel terms further than ``CUTOFF`` bandwidths from a center are below
``exp(-CUTOFF^2 / 2) ~ 3e-18`` and are skipped, which makes the layer cost
independent of the number of bins.  Delays inside each record are summed in
sorted order, so the features are bitwise invariant under permutation.
"""
from dataclasses import dataclass
import math

import numpy as np

CUTOFF = 9.0


@dataclass
class HistogramLayerParams:
    n_bins: int
    tau_min: float = 0.0
    tau_max: float = 100.0
    log_bandwidth: float = None

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        if not self.tau_max > self.tau_min:
            raise ValueError("tau_max must exceed tau_min")
        if self.log_bandwidth is None:
            # phi = two bin widths
            self.log_bandwidth = 2.0 * math.log(2.0 * self.bin_width)

    @property
    def bin_width(self):
        return (self.tau_max - self.tau_min) / (self.n_bins - 1)

    @property
    def centers(self):
        return np.linspace(self.tau_min, self.tau_max, self.n_bins)

    @property
    def bandwidth(self):
        """phi^2."""
        return math.exp(self.log_bandwidth)


@dataclass
class _HistCache:
    order: np.ndarray
    flat_idx: np.ndarray
    diff: np.ndarray
    kern: np.ndarray
    phi2: float
    n_sets: int


def _windows(values, owner, n_sets, h, log_bandwidth):
    phi2 = math.exp(log_bandwidth)
    width = h.bin_width
    half = int(math.ceil(CUTOFF * math.sqrt(phi2) / width))
    half = min(half, h.n_bins)
    centers = h.centers
    nearest = np.rint((values - h.tau_min) / width)
    nearest = np.clip(nearest, -half - 1, h.n_bins + half).astype(np.int64)
    idx = nearest[:, None] + np.arange(-half, half + 1)[None, :]
    valid = (idx >= 0) & (idx < h.n_bins)
    idx_c = np.clip(idx, 0, h.n_bins - 1)
    diff = values[:, None] - centers[idx_c]
    kern = np.exp(-0.5 * diff * diff / phi2)
    kern *= valid
    flat_idx = owner[:, None] * h.n_bins + idx_c
    return flat_idx, diff, kern, phi2


def hist_forward_sets(ds, h, log_bandwidth=None, return_cache=False):
    """Features for every record of a :class:`~tlsnet._validation.DelaySets`.

    Returns an ``(n_records, n_bins)`` array (and a backward cache if asked).
    """
    log_bandwidth = h.log_bandwidth if log_bandwidth is None else log_bandwidth
    n_sets = ds.n_sets
    owner = ds.owner
    order = np.lexsort((ds.values, owner))
    values = ds.values[order]
    owner = owner[order]
    if values.size == 0:
        feats = np.zeros((n_sets, h.n_bins))
        cache = _HistCache(order, np.empty((0, 1), np.int64), np.empty((0, 1)), np.empty((0, 1)), math.exp(log_bandwidth), n_sets)
        return (feats, cache) if return_cache else feats
    flat_idx, diff, kern, phi2 = _windows(values, owner, n_sets, h, log_bandwidth)
    feats = np.bincount(flat_idx.ravel(), weights=kern.ravel(), minlength=n_sets * h.n_bins)
    feats = feats.reshape(n_sets, h.n_bins)
    if return_cache:
        return feats, _HistCache(order, flat_idx, diff, kern, phi2, n_sets)
    return feats


def hist_backward(grad_feats, cache):
    """Backpropagate ``dL/dfeatures`` to the log-bandwidth and to every delay.

    The delay gradient is returned in the caller's original (unsorted) order.
    """
    g = grad_feats.reshape(-1)[cache.flat_idx] * cache.kern
    d_log_bw = 0.5 * float(np.sum(g * cache.diff * cache.diff)) / cache.phi2
    d_sorted = -np.sum(g * cache.diff, axis=1) / cache.phi2
    d_values = np.empty_like(d_sorted)
    d_values[cache.order] = d_sorted
    return d_log_bw, d_values


def hist_forward(delays, h):
    """Feature vector of length ``n_bins`` for a single record of delays."""
    from .._validation import DelaySets

    delays = np.asarray(delays, dtype=np.float64).reshape(-1)
    ds = DelaySets(delays, np.array([0, delays.size]))
    return hist_forward_sets(ds, h)[0]
