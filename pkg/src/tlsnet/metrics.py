"""Per-detuning error metrics and their CSV form."""
from dataclasses import dataclass
import csv
import io
import math

import numpy as np

from .nn.io import atomic_write_text

HEADER = ("estimator", "delta", "rmse", "bias", "variance", "crb")


@dataclass
class MetricsRow:
    estimator: str
    delta: float  # nan marks the pooled row
    rmse: float
    bias: float
    variance: float
    crb: float = None

    @property
    def pooled(self):
        return isinstance(self.delta, float) and math.isnan(self.delta)


def group_metrics(pred, delta, estimator):
    """RMSE, bias and variance of ``pred`` for every distinct true ``delta``.

    ``variance`` is the population variance of the estimates in a group, so
    ``rmse^2 = bias^2 + variance`` holds up to rounding.  A final pooled row
    (``delta = nan``) applies the same definitions to the errors ``pred - delta``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if pred.shape != delta.shape:
        raise ValueError("pred and delta must have the same shape")
    if pred.size == 0:
        raise ValueError("no predictions to evaluate")
    rows = []
    for d in np.unique(delta):
        est = pred[delta == d]
        if est.size == 0:
            raise ValueError(f"empty group at delta={d}")
        mean = est.mean()
        rows.append(
            MetricsRow(
                estimator,
                float(d),
                float(np.sqrt(np.mean((est - d) ** 2))),
                float(mean - d),
                float(np.mean((est - mean) ** 2)),
            )
        )
    err = pred - delta
    rows.append(
        MetricsRow(
            estimator,
            float("nan"),
            float(np.sqrt(np.mean(err**2))),
            float(err.mean()),
            float(np.mean((err - err.mean()) ** 2)),
        )
    )
    return rows


def per_delta(rows):
    return [r for r in rows if not r.pooled]


def delta_averaged_rmse(rows):
    return float(np.mean([r.rmse for r in per_delta(rows)]))


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def metrics_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        delta = "all" if r.pooled else _fmt(r.delta)
        w.writerow([r.estimator, delta, _fmt(r.rmse), _fmt(r.bias), _fmt(r.variance), _fmt(r.crb)])
    return buf.getvalue()


def write_metrics_csv(rows, path):
    atomic_write_text(path, metrics_to_csv(rows))


def read_metrics_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HEADER:
            raise ValueError(f"{path}: expected header {','.join(HEADER)}")
        for rec in reader:
            delta = float("nan") if rec["delta"] == "all" else float(rec["delta"])
            crb = float(rec["crb"]) if rec["crb"] else None
            rows.append(MetricsRow(rec["estimator"], delta, float(rec["rmse"]), float(rec["bias"]), float(rec["variance"]), crb))
    return rows
