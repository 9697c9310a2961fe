"""Synthetic trajectory datasets and their JSON-lines persistence.

Each record is generated from its own seeded stream ``(seed, split, index)``,
so any line of a file can be regenerated in isolation and files are
byte-identical across runs.
"""
from dataclasses import dataclass
import json
import os

import numpy as np

from ._rng import derive_seed, make_rng
from ._validation import DelaySets, check_delay_sets
from .nn.io import atomic_write_text
from .physics import (
    CdfTable,
    TlsParams,
    add_label_noise,
    add_time_jitter,
    delay_pdf_grid,
    sample_delays_jump,
    sample_from_table,
    Trajectory,
)

SPLITS = ("train", "test")


@dataclass
class Dataset:
    """In-memory dataset: delay records plus per-record labels and provenance."""

    X: DelaySets
    y: np.ndarray
    delta_true: np.ndarray
    omega: np.ndarray
    gamma: np.ndarray
    gen: list
    seeds: np.ndarray

    def __len__(self):
        return self.X.n_sets

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(
            self.X.subset(idx),
            self.y[idx],
            self.delta_true[idx],
            self.omega[idx],
            self.gamma[idx],
            [self.gen[i] for i in idx],
            self.seeds[idx],
        )

    def groups(self):
        """``{delta: indices}`` for the distinct true detunings (test sets)."""
        values, inverse = np.unique(self.delta_true, return_inverse=True)
        return {float(v): np.flatnonzero(inverse == i) for i, v in enumerate(values)}


def test_deltas(config):
    p = config.physics
    return np.linspace(p.prior_lo, p.prior_hi, config.data.n_test_deltas)


def _tables(deltas, omega, gamma, n_points):
    """CDF tables on ``[0, 100/gamma]`` for several detunings at once."""
    tau = np.linspace(0.0, 100.0 / gamma, n_points)
    w = delay_pdf_grid(tau, deltas, omega, gamma)
    cdf = np.zeros_like(w)
    np.cumsum(0.5 * (w[:, 1:] + w[:, :-1]) * np.diff(tau)[None, :], axis=1, out=cdf[:, 1:])
    return [CdfTable(tau, row) for row in cdf]


def _record_seeds(master, n, stream_name):
    return np.array([derive_seed(master, i, stream_name) for i in range(n)], dtype=np.int64)


def _draw_deltas(rngs, lo, hi):
    return np.array([rng.uniform(lo, hi) for rng in rngs])


def train_deltas(config):
    """Noiseless detunings of the train split, without sampling any delays."""
    rngs = [make_rng(int(s)) for s in _record_seeds(config.seed, config.data.n_train, "train")]
    return _draw_deltas(rngs, config.physics.prior_lo, config.physics.prior_hi)


def generate_trajectories(config, split, omega=None, sigma_tau=None, n_test=None, chunk=256):
    """Generate the records of one split as a :class:`Dataset`.

    Record ``i`` owns the stream ``(seed, stream_name, i)``; train records
    first draw their detuning uniformly from the prior, test records take
    theirs from the evenly spaced test grid.  ``omega``, ``sigma_tau`` and
    ``n_test`` override the config (used for the out-of-distribution sweeps).
    Train labels receive ``noise.sigma_y`` label noise; delays receive the
    split's time jitter.
    """
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    c = config
    omega = c.physics.omega if omega is None else float(omega)
    gamma = c.physics.gamma
    if sigma_tau is None:
        sigma_tau = c.noise.train_sigma_tau if split == "train" else c.noise.test_sigma_tau
    n_test = c.data.n_test if n_test is None else int(n_test)
    n = c.data.n_train if split == "train" else c.data.n_test_deltas * n_test
    stream_name = split if omega == c.physics.omega else f"{split}:omega={omega!r}"
    seeds = _record_seeds(c.seed, n, stream_name)
    rngs = [make_rng(int(s)) for s in seeds]
    if split == "train":
        deltas = _draw_deltas(rngs, c.physics.prior_lo, c.physics.prior_hi)
    else:
        deltas = np.repeat(test_deltas(c), n_test)
    n_delays = c.data.n_delays
    values = np.empty((n, n_delays))

    if c.data.generator == "analytic":
        if split == "test":
            grid = np.unique(deltas)
            by_delta = dict(zip(grid.tolist(), _tables(grid, omega, gamma, c.data.cdf_points)))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            if split == "test":
                tables = [by_delta[d] for d in deltas[start:stop].tolist()]
            else:
                tables = _tables(deltas[start:stop], omega, gamma, c.data.cdf_points)
            for i, table in zip(range(start, stop), tables):
                values[i] = sample_from_table(table, rngs[i].random(n_delays))
    else:
        for i in range(n):
            p = TlsParams(deltas[i], omega, gamma)
            values[i] = sample_delays_jump(p, n_delays, rngs[i], dt=c.data.jump_dt / gamma).delays

    if sigma_tau > 0:
        for i in range(n):
            jitter_seed = derive_seed(c.seed, i, f"{stream_name}:jitter:{sigma_tau!r}")
            values[i] = add_time_jitter(Trajectory(values[i]), sigma_tau, jitter_seed).delays

    labels = deltas.copy()
    if split == "train" and c.noise.sigma_y > 0:
        for i in range(n):
            labels[i] = add_label_noise(deltas[i], c.noise.sigma_y, derive_seed(c.seed, i, "label"))

    ds = DelaySets(values.reshape(-1), np.arange(n + 1) * n_delays)
    return Dataset(ds, labels, deltas, np.full(n, omega), np.full(n, gamma), [c.data.generator] * n, seeds)


def _record_line(delays, label, true_delta, omega, gamma, gen, seed):
    rec = {
        "delays": [float(v) for v in delays],
        "delta": float(label),
        "omega": float(omega),
        "gamma": float(gamma),
        "gen": gen,
        "seed": int(seed),
    }
    if label != true_delta:
        rec["delta_true"] = float(true_delta)
    return json.dumps(rec, separators=(",", ":"))


def write_dataset(ds, path, manifest=None):
    """Write JSON lines plus ``<path>.manifest.json`` (atomic renames)."""
    rows = ds.X.to_list()
    lines = [
        _record_line(rows[i], ds.y[i], ds.delta_true[i], ds.omega[i], ds.gamma[i], ds.gen[i], ds.seeds[i])
        for i in range(len(ds))
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
    info = {"n_records": len(ds), "file": os.path.basename(os.fspath(path))}
    info.update(manifest or {})
    atomic_write_text(manifest_path(path), json.dumps(info, indent=2, sort_keys=True) + "\n")
    return path


def manifest_path(path):
    return os.fspath(path) + ".manifest.json"


def generate_dataset(config, split, out_path):
    """Generate one split and persist it; returns the in-memory dataset."""
    ds = generate_trajectories(config, split)
    manifest = {
        "split": split,
        "seed": config.seed,
        "config_hash": config.hash(),
        "generator": config.data.generator,
        "n_delays": config.data.n_delays,
        "sigma_tau": config.noise.train_sigma_tau if split == "train" else config.noise.test_sigma_tau,
        "sigma_y": config.noise.sigma_y if split == "train" else 0.0,
        "omega": config.physics.omega,
        "gamma": config.physics.gamma,
    }
    if split == "test":
        manifest["n_test_deltas"] = config.data.n_test_deltas
        manifest["n_test"] = config.data.n_test
    write_dataset(ds, out_path, manifest)
    return ds


def load_dataset(path):
    """Read a JSON-lines dataset written by :func:`write_dataset`."""
    rows, y, true, omega, gamma, gen, seeds = [], [], [], [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rows.append(np.asarray(rec["delays"], dtype=np.float64))
                y.append(float(rec["delta"]))
                true.append(float(rec.get("delta_true", rec["delta"])))
                omega.append(float(rec["omega"]))
                gamma.append(float(rec["gamma"]))
                gen.append(rec["gen"])
                seeds.append(int(rec["seed"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return Dataset(
        check_delay_sets(rows),
        np.asarray(y),
        np.asarray(true),
        np.asarray(omega),
        np.asarray(gamma),
        gen,
        np.asarray(seeds, dtype=np.int64),
    )
