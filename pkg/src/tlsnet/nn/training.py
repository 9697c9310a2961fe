"""Mini-batch Adam training with a held-out split and early stopping."""
from dataclasses import asdict, dataclass, field, fields
import logging
import math

import numpy as np

from .._rng import derive_seed, stream
from .._validation import check_delay_sets, check_targets
from ..exceptions import DomainError, NumericalDiagnostic
from .losses import head_for_loss
from .network import HIDDEN, batch_loss, grad, init_model
from .optim import adam_init, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Hyperparameters of one network; ranges follow the tuning search space."""

    n_bins: int = 256
    loss: str = "gaussian_nll"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 100
    batch_size: int = 256
    dropout: float = 0.0
    patience: int = 10
    validation_fraction: float = 0.2
    seed: int = 0
    split_seed: int = None
    hidden: tuple = HIDDEN
    tau_min: float = 0.0
    tau_max: float = 100.0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        head_for_loss(self.loss)
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must be positive")
        if not 0.0 <= self.dropout <= 0.2:
            raise ValueError("dropout must lie in [0, 0.2]")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")

    @property
    def head(self):
        return head_for_loss(self.loss)

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return TrainConfig(**d)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def append(self, epoch, train_loss, val_loss):
        self.rows.append((int(epoch), float(train_loss), float(val_loss)))

    @property
    def train_losses(self):
        return np.array([r[1] for r in self.rows])

    @property
    def val_losses(self):
        return np.array([r[2] for r in self.rows])

    def to_csv(self, path):
        from .io import atomic_write_text

        lines = ["epoch,train_loss,val_loss"] + [f"{e},{tr!r},{va!r}" for e, tr, va in self.rows]
        atomic_write_text(path, "\n".join(lines) + "\n")


def split_indices(n, validation_fraction, seed):
    """Seeded 80/20-style train/validation index split."""
    perm = stream(seed, 0, "split").permutation(n)
    n_val = max(1, int(round(validation_fraction * n)))
    if n - n_val < 1:
        raise ValueError("dataset too small to split")
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(X, y, config, model=None, perturb=None, validation=None):
    """Fit one network.

    Parameters
    ----------
    X : delay records (2-D array, ragged list or DelaySets)
    y : array_like
        Targets, one per record.
    config : TrainConfig
    model : MlpModel, optional
        Starting point; a fresh model is initialized from ``config.seed``.
    perturb : callable, optional
        ``perturb(values, input_grad) -> values``; when given, every batch
        loss becomes ``L(x) + L(perturb(x))`` (adversarial training).
    validation : tuple, optional
        Explicit ``(X_val, y_val)``; otherwise ``config.validation_fraction``
        of ``X`` is held out.

    Returns
    -------
    model : MlpModel
        Weights from the epoch with the best validation loss.
    log : TrainingLog
        Epoch 0 holds the losses of the initial weights.
    """
    ds = check_delay_sets(X)
    y = check_targets(y, ds.n_sets)
    if ds.n_sets == 0:
        raise ValueError("empty dataset")
    if validation is None:
        if ds.n_sets < 10:
            raise ValueError("need at least 10 examples to train with a validation split")
        split_seed = config.seed if config.split_seed is None else config.split_seed
        tr_idx, va_idx = split_indices(ds.n_sets, config.validation_fraction, split_seed)
        ds_tr, y_tr = ds.subset(tr_idx), y[tr_idx]
        ds_va, y_va = ds.subset(va_idx), y[va_idx]
    else:
        ds_tr, y_tr = ds, y
        ds_va = check_delay_sets(validation[0])
        y_va = check_targets(validation[1], ds_va.n_sets)
    if config.loss == "msle" and (np.any(y_tr <= -1) or np.any(y_va <= -1)):
        raise DomainError("MSLE needs targets greater than -1 (noisy labels?); use the rmse loss")

    if model is None:
        model = init_model(
            config.n_bins,
            head=config.head,
            hidden=config.hidden,
            dropout_p=config.dropout,
            tau_min=config.tau_min,
            tau_max=config.tau_max,
            rng_seed=stream(config.seed, 0, "init"),
        )
    else:
        model = model.copy()
    shuffle_rng = stream(config.seed, 0, "shuffle")
    dropout_rng = stream(config.seed, 0, "dropout")

    params = model.params()
    state = adam_init(params)
    tlog = TrainingLog()
    best_val = batch_loss(model, ds_va, y_va, config.loss)
    tlog.append(0, batch_loss(model, ds_tr, y_tr, config.loss), best_val)
    best_params = {k: np.array(v, copy=True) for k, v in params.items()}
    since_best = 0
    n = ds_tr.n_sets
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = ds_tr.subset(idx), y_tr[idx]
            loss, grads, in_grad = grad(model, xb, yb, config.loss, training=True, rng_seed=dropout_rng)
            if perturb is not None:
                xb_adv = xb.with_values(perturb(xb.values, in_grad))
                loss_adv, grads_adv, _ = grad(model, xb_adv, yb, config.loss, training=True, rng_seed=dropout_rng)
                loss += loss_adv
                grads = {k: grads[k] + grads_adv[k] for k in grads}
            if not math.isfinite(loss):
                raise NumericalDiagnostic(f"training loss became {loss} in epoch {epoch}")
            params, state = adam_step(params, grads, state, config.learning_rate, config.beta1, config.beta2)
            model.set_params(params)
            total += loss * idx.size
            count += idx.size
        val = batch_loss(model, ds_va, y_va, config.loss)
        if not math.isfinite(val):
            raise NumericalDiagnostic(f"validation loss became {val} in epoch {epoch}")
        tlog.append(epoch, total / count, val)
        log.debug("epoch %d train %.5f val %.5f", epoch, total / count, val)
        if val < best_val:
            best_val = val
            best_params = {k: np.array(v, copy=True) for k, v in params.items()}
            tlog.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                tlog.stopped_early = True
                break
    model.set_params(best_params)
    return model, tlog


def member_seed(seed, index):
    return derive_seed(seed, index, "member")
