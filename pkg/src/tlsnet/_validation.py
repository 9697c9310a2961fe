"""Input validation helpers shared by the estimators.

A batch of measurement records is ragged in general (records may hold
different numbers of delays), so it is carried as a flat value array plus
offsets, like a CSR row pointer.
"""
from dataclasses import dataclass

import numpy as np

from .physics import Trajectory


@dataclass(frozen=True)
class DelaySets:
    values: np.ndarray
    offsets: np.ndarray

    @property
    def n_sets(self):
        return self.offsets.size - 1

    @property
    def lengths(self):
        return np.diff(self.offsets)

    @property
    def owner(self):
        """Record index of every entry of ``values``."""
        return np.repeat(np.arange(self.n_sets), self.lengths)

    def __len__(self):
        return self.n_sets

    def subset(self, idx):
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        lengths = self.lengths[idx]
        offsets = np.concatenate([[0], np.cumsum(lengths)])
        if idx.size == 0:
            return DelaySets(np.empty(0), offsets)
        starts = self.offsets[idx]
        gather = np.repeat(starts - offsets[:-1], lengths) + np.arange(offsets[-1])
        return DelaySets(self.values[gather], offsets)

    def with_values(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValueError("replacement values must keep the layout")
        return DelaySets(values, self.offsets)

    def to_list(self):
        return np.split(self.values, self.offsets[1:-1])

    def as_matrix(self):
        """Dense ``(n_sets, n_delays)`` view; only for equal-length records."""
        lengths = self.lengths
        if lengths.size and np.any(lengths != lengths[0]):
            raise ValueError("records have different lengths")
        width = int(lengths[0]) if lengths.size else 0
        return self.values.reshape(self.n_sets, width)


def check_delay_sets(X, allow_nonfinite=False):
    """Coerce ``X`` into :class:`DelaySets`.

    Accepts a 2-D array ``(n_records, n_delays)``, a sequence of 1-D arrays
    (ragged), a sequence of :class:`~tlsnet.physics.Trajectory`, a single
    Trajectory or an existing :class:`DelaySets`.
    """
    if isinstance(X, DelaySets):
        ds = X
    elif isinstance(X, Trajectory):
        ds = DelaySets(X.delays.copy(), np.array([0, X.delays.size]))
    elif isinstance(X, np.ndarray) and X.dtype != object:
        if X.ndim == 1:
            raise ValueError(
                "expected a 2-D array of delay records; wrap a single record as X[None, :]"
            )
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {X.shape}")
        n, m = X.shape
        ds = DelaySets(np.ascontiguousarray(X, dtype=np.float64).reshape(-1), np.arange(n + 1) * m)
    else:
        rows = [r.delays if isinstance(r, Trajectory) else np.asarray(r, dtype=np.float64).reshape(-1) for r in X]
        lengths = np.array([r.size for r in rows], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        values = np.concatenate(rows) if rows else np.empty(0)
        ds = DelaySets(values.astype(np.float64), offsets)
    if not allow_nonfinite and not np.all(np.isfinite(ds.values)):
        raise ValueError("delays must be finite")
    return ds


def check_targets(y, n):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != n:
        raise ValueError(f"got {y.size} targets for {n} delay records")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    return y
