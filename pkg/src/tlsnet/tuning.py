"""Uniform random search over the network hyperparameters."""
from dataclasses import dataclass
import csv
import io
import json
import logging
import math

import numpy as np
from joblib import Parallel, delayed

from ._rng import derive_seed, make_rng
from ._validation import check_delay_sets, check_targets
from .exceptions import NumericalDiagnostic
from .nn.io import atomic_write_text
from .nn.network import predict as _predict
from .nn.training import split_indices, train

log = logging.getLogger(__name__)

TRIAL_KEYS = ("n_bins", "loss", "learning_rate", "beta1", "beta2", "epochs", "batch_size", "dropout", "patience")


@dataclass
class Trial:
    index: int
    params: dict
    val_rmse: float = math.nan
    best_epoch: int = 0
    status: str = "ok"
    error: str = ""

    @property
    def failed(self):
        return self.status != "ok"


def sample_trial(space, rng):
    """Draw one hyperparameter set from a :class:`TunerConfig` search space."""
    lr_lo, lr_hi = space.learning_rate
    return {
        "n_bins": int(rng.integers(space.bins[0], space.bins[1], endpoint=True)),
        "loss": str(space.losses[rng.integers(len(space.losses))]),
        "learning_rate": float(math.exp(rng.uniform(math.log(lr_lo), math.log(lr_hi)))),
        "beta1": float(rng.uniform(*space.beta1)),
        "beta2": float(rng.uniform(*space.beta2)),
        "epochs": int(rng.integers(space.epochs[0], space.epochs[1], endpoint=True)),
        "batch_size": int(space.batch_sizes[rng.integers(len(space.batch_sizes))]),
        "dropout": float(rng.uniform(*space.dropout)),
        "patience": int(rng.integers(space.patience[0], space.patience[1], endpoint=True)),
    }


def _run_trial(i, params, base, tr, va, max_epochs):
    cfg = base.replace(**params, seed=derive_seed(base.seed, i, "trial"))
    if max_epochs is not None:
        cfg = cfg.replace(epochs=min(cfg.epochs, int(max_epochs)))
    trial = Trial(i, params)
    try:
        model, tlog = train(tr[0], tr[1], cfg, validation=va)
        out = _predict(model, va[0])
        mu = out[0] if model.head == "gaussian" else out
        rmse = float(np.sqrt(np.mean((mu - va[1]) ** 2)))
        if not math.isfinite(rmse):
            raise NumericalDiagnostic("non-finite validation RMSE")
        trial.val_rmse, trial.best_epoch = rmse, tlog.best_epoch
    except (NumericalDiagnostic, ValueError, FloatingPointError, MemoryError) as exc:
        log.warning("trial %d failed: %s", i, exc)
        trial.status, trial.error = "failed", str(exc)
    return trial


def random_search_tune(config, X, y, n_trials=None, n_jobs=1):
    """Sample ``n_trials`` hyperparameter sets and score each by validation RMSE.

    Every trial trains on the same 80% split of ``X`` (capped at
    ``tuner.max_train`` examples) and is scored on the held-out 20%.  A trial
    whose training fails is recorded as failed and the search continues.

    Returns
    -------
    best : dict or None
        Parameters of the trial with the lowest validation RMSE.
    trials : list of Trial
    """
    space = config.tuner
    n_trials = space.n_trials if n_trials is None else int(n_trials)
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    ds = check_delay_sets(X)
    y = check_targets(y, ds.n_sets)
    base = config.model.replace(seed=config.seed)
    tr_idx, va_idx = split_indices(ds.n_sets, base.validation_fraction, config.seed)
    if space.max_train is not None:
        tr_idx = tr_idx[: int(space.max_train)]
        va_idx = va_idx[: max(1, int(round(space.max_train * base.validation_fraction / (1 - base.validation_fraction))))]
    tr = (ds.subset(tr_idx), y[tr_idx])
    va = (ds.subset(va_idx), y[va_idx])
    rng = make_rng(derive_seed(config.seed, 0, "tuner"))
    samples = [sample_trial(space, rng) for _ in range(n_trials)]
    jobs = (delayed(_run_trial)(i, p, base, tr, va, space.max_epochs) for i, p in enumerate(samples))
    trials = list(Parallel(n_jobs=n_jobs)(jobs)) if n_jobs != 1 else [j[0](*j[1], **j[2]) for j in jobs]
    ok = [t for t in trials if not t.failed]
    best = min(ok, key=lambda t: t.val_rmse).params if ok else None
    return best, trials


def trials_to_csv(trials):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", *TRIAL_KEYS, "val_rmse", "best_epoch", "status", "error"])
    for t in trials:
        w.writerow([t.index, *(t.params[k] for k in TRIAL_KEYS), repr(t.val_rmse), t.best_epoch, t.status, t.error])
    return buf.getvalue()


def write_best(best, path):
    atomic_write_text(path, json.dumps(best, indent=2, sort_keys=True) + "\n")
