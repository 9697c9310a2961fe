"""Experiment drivers: evaluation, CRB curves, OOD sweeps and timing."""
from dataclasses import dataclass
import csv
import io
import statistics
import time

import numpy as np

from . import ensemble as _ens
from .bayes import GridBayesEstimator, biased_crb, fisher_information
from .datasets import generate_trajectories
from .metrics import group_metrics, per_delta, read_metrics_csv
from .nn.io import atomic_write_text
from .nn.network import MlpModel, predict as _model_predict
from .physics import TlsParams

ESTIMATOR_TAGS = ("single", "ensemble", "bayes", "custom")


def estimator_tag(estimator):
    if isinstance(estimator, MlpModel):
        return "single"
    if isinstance(estimator, _ens.DeepEnsemble):
        return "ensemble"
    if isinstance(estimator, GridBayesEstimator):
        return "bayes"
    if hasattr(estimator, "predict"):
        return "custom"
    raise ValueError(f"cannot evaluate objects of type {type(estimator).__name__}")


def predict_point(estimator, X):
    """Point estimates from a model, an ensemble, or any ``predict`` object."""
    tag = estimator_tag(estimator)
    if tag == "single":
        out = _model_predict(estimator, X)
        return out[0] if estimator.head == "gaussian" else out
    if tag == "ensemble":
        return _ens.predict(estimator, X).mu
    if tag == "bayes" and not hasattr(estimator, "grid_"):
        estimator.fit()
    return np.asarray(estimator.predict(X), dtype=np.float64)


def evaluate(estimator, dataset, name=None):
    """Per-detuning metrics of ``estimator`` on a grouped test dataset.

    Errors are measured against the noiseless detuning of every record.
    ``name`` labels the rows; it defaults to the estimator kind.
    """
    tag = estimator_tag(estimator)
    if len(dataset) == 0:
        raise ValueError("empty test set")
    pred = predict_point(estimator, dataset.X)
    return group_metrics(pred, dataset.delta_true, name or tag)


# -- Cramér-Rao curve --------------------------------------------------------


def crb_curve(config, bias_rows, estimator=None):
    """Biased CRB along the detunings of a metrics table.

    ``bias_rows`` is a list of :class:`MetricsRow` or the path of a metrics
    CSV.  Rows of ``estimator`` (default: the first estimator in the table)
    supply the bias curve; the Fisher information is computed per detuning.
    """
    if not isinstance(bias_rows, list):
        bias_rows = read_metrics_csv(bias_rows)
    rows = per_delta(bias_rows)
    if estimator is None:
        if not rows:
            raise ValueError("no per-detuning rows in the bias table")
        estimator = rows[0].estimator
    rows = sorted((r for r in rows if r.estimator == estimator), key=lambda r: r.delta)
    if len(rows) < 2:
        raise ValueError(f"need at least two detunings for estimator {estimator!r}")
    delta = np.array([r.delta for r in rows])
    bias = np.array([r.bias for r in rows])
    p = config.physics
    fisher = np.array([fisher_information(TlsParams(d, p.omega, p.gamma)) for d in delta])
    return biased_crb(delta, bias, fisher, config.data.n_delays)


def attach_crb(rows, curve):
    """Copy of ``rows`` with the ``crb`` column filled from ``curve``."""
    bound = dict(zip(curve.delta_grid.tolist(), curve.bound.tolist()))
    out = []
    for r in rows:
        b = None if r.pooled else bound.get(r.delta)
        out.append(type(r)(r.estimator, r.delta, r.rmse, r.bias, r.variance, None if b is None or np.isnan(b) else b))
    return out


def crb_to_csv(curve):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "fisher", "bias_slope", "bound"])
    for d, f, s, b in zip(curve.delta_grid, curve.fisher, curve.bias_slope, curve.bound):
        w.writerow([repr(float(d)), repr(float(f)), repr(float(s)), "" if np.isnan(b) else repr(float(b))])
    return buf.getvalue()


# -- out-of-distribution uncertainty ----------------------------------------


@dataclass
class OodRow:
    shift: str  # "omega" or "sigma_tau"
    value: float
    mean_sigma2: float
    rmse: float


def run_ood_uncertainty(e, config, omega_list=None, sigma_tau_list=None):
    """Average mixture variance on fresh test sets under a generator shift.

    Each Rabi frequency in ``omega_list`` (at the configured test jitter) and
    each jitter level in ``sigma_tau_list`` (at the configured Rabi frequency)
    gets its own test set of ``config.ood.n_per_delta`` records per detuning.
    """
    n = config.ood.n_per_delta
    settings = [("omega", float(w), {"omega": w}) for w in (omega_list or ())]
    settings += [("sigma_tau", float(s), {"sigma_tau": s}) for s in (sigma_tau_list or ())]
    rows = []
    for shift, value, kw in settings:
        ds = generate_trajectories(config, "test", n_test=n, **kw)
        pred = _ens.predict(e, ds.X)
        rmse = float(np.sqrt(np.mean((pred.mu - ds.delta_true) ** 2)))
        rows.append(OodRow(shift, value, float(pred.sigma2.mean()), rmse))
    return rows


def ood_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["shift", "value", "mean_sigma2", "rmse"])
    for r in rows:
        w.writerow([r.shift, repr(r.value), repr(r.mean_sigma2), repr(r.rmse)])
    return buf.getvalue()


# -- timing -------------------------------------------------------------------


@dataclass
class TimingRow:
    n_trajectories: int
    ensemble_s: float
    bayes_s: float

    @property
    def ratio(self):
        """Grid-Bayes time over ensemble time."""
        return self.bayes_s / self.ensemble_s


def _median_time(fn, repeats):
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def time_inference(e, bayes, X, counts=(1, 10, 100, 1000), repeats=10):
    """Median wall-clock time of batched ensemble and grid-Bayes inference.

    The first ``n`` records of ``X`` are used for every ``n`` in ``counts``;
    each measurement follows one untimed warm-up call.
    """
    from ._validation import check_delay_sets

    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    ds = check_delay_sets(X)
    if not hasattr(bayes, "grid_"):
        bayes.fit()
    rows = []
    for n in counts:
        if not 1 <= n <= ds.n_sets:
            raise ValueError(f"count {n} outside 1..{ds.n_sets}")
        sub = ds.subset(np.arange(n))
        t_e = _median_time(lambda: _ens.predict(e, sub), repeats)
        t_b = _median_time(lambda: bayes.predict(sub), repeats)
        rows.append(TimingRow(int(n), t_e, t_b))
    return rows


def timing_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_trajectories", "ensemble_s", "bayes_s", "ratio"])
    for r in rows:
        w.writerow([r.n_trajectories, repr(r.ensemble_s), repr(r.bayes_s), repr(r.ratio)])
    return buf.getvalue()


def write_text(path, text):
    atomic_write_text(path, text)
    return path
