"""Deep ensembles of Gaussian-head networks.

Members are trained independently (different initialization and shuffle
seeds, same train/validation split) and combined into an evenly weighted
Gaussian mixture whose mean is the point estimate and whose variance is the
predictive uncertainty.
"""
from dataclasses import dataclass, field
from functools import partial
import json
import os

import numpy as np
from joblib import Parallel, delayed

from .nn.io import atomic_write_text, load_model, save_model
from .nn.network import predict as member_predict
from .nn.quantize import quantize
from .nn.training import TrainConfig, member_seed, train

__all__ = [
    "DeepEnsemble",
    "EnsemblePrediction",
    "fgsm_example",
    "default_epsilon",
    "train_ensemble",
    "predict",
    "mixture_moments",
    "quantize_ensemble",
    "save_ensemble",
    "load_ensemble",
]

MANIFEST = "manifest.json"


@dataclass
class DeepEnsemble:
    members: list
    adversarial: bool = False
    epsilon: float = None
    seeds: list = field(default_factory=list)
    logs: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        ref = self.members[0].histogram
        for m in self.members:
            h = m.histogram
            if (h.n_bins, h.tau_min, h.tau_max) != (ref.n_bins, ref.tau_min, ref.tau_max):
                raise ValueError("all members must share the histogram support and bin count")
            if m.head != "gaussian":
                raise ValueError("ensemble members need a Gaussian head")

    @property
    def size(self):
        return len(self.members)

    @property
    def precision_tag(self):
        return self.members[0].precision_tag


@dataclass
class EnsemblePrediction:
    """Mixture mean/variance plus the member moments, shape ``(M, n)``."""

    mu: np.ndarray
    sigma2: np.ndarray
    member_mu: np.ndarray
    member_sigma2: np.ndarray

    @property
    def members(self):
        return np.stack([self.member_mu, self.member_sigma2], axis=-1)


def default_epsilon(tau_min=0.0, tau_max=100.0):
    """1% of the delay input range."""
    return 0.01 * (tau_max - tau_min)


def fgsm_example(delays, grad_wrt_delays, epsilon):
    """Fast-gradient-sign perturbation ``x + epsilon * sign(dL/dx)``."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    delays = np.asarray(delays, dtype=np.float64)
    if epsilon == 0:
        return delays.copy()
    return delays + epsilon * np.sign(np.asarray(grad_wrt_delays, dtype=np.float64))


def mixture_moments(member_mu, member_sigma2, printed_form=False):
    """Mean and variance of an evenly weighted mixture over axis 0.

    The variance is evaluated as ``mean(sigma2_m) + mean((mu_m - mu)^2)``,
    which equals ``mean(sigma2_m + mu_m^2) - mu^2`` without the cancellation.
    ``printed_form=True`` returns ``mean(sigma2_m + mu_m^2) - mu`` instead; it
    is dimensionally inconsistent and kept only for side-by-side comparison.
    """
    member_mu = np.asarray(member_mu, dtype=np.float64)
    member_sigma2 = np.asarray(member_sigma2, dtype=np.float64)
    mu = member_mu.mean(axis=0)
    if printed_form:
        return mu, np.mean(member_sigma2 + member_mu**2, axis=0) - mu
    sigma2 = member_sigma2.mean(axis=0) + np.mean((member_mu - mu) ** 2, axis=0)
    sigma2 = np.where(sigma2 < 0, np.where(sigma2 > -1e-12, 0.0, sigma2), sigma2)
    return mu, sigma2


def predict(e, X, printed_form=False):
    """Mixture prediction for every delay record in ``X``."""
    outs = [member_predict(m, X) for m in e.members]
    member_mu = np.stack([o[0] for o in outs])
    member_sigma2 = np.stack([o[1] for o in outs])
    mu, sigma2 = mixture_moments(member_mu, member_sigma2, printed_form=printed_form)
    return EnsemblePrediction(mu, sigma2, member_mu, member_sigma2)


def _train_member(X, y, config, perturb):
    return train(X, y, config, perturb=perturb)


def train_ensemble(X, y, config, M=10, adversarial=False, epsilon=None, seed=0, member_seeds=None, n_jobs=1):
    """Train ``M`` Gaussian-head members.

    Members differ only in their initialization/shuffle seed; every member
    uses the same train/validation split (derived from ``seed``).  With
    ``adversarial`` set, each batch loss adds the loss on FGSM-perturbed
    delays (``epsilon`` defaults to 1% of the histogram range).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if config.loss != "gaussian_nll":
        config = config.replace(loss="gaussian_nll")
    if member_seeds is None:
        member_seeds = [member_seed(seed, m) for m in range(M)]
    if len(member_seeds) != M:
        raise ValueError("need one seed per member")
    if adversarial:
        epsilon = default_epsilon(config.tau_min, config.tau_max) if epsilon is None else float(epsilon)
        perturb = partial(fgsm_example, epsilon=epsilon)
    else:
        perturb, epsilon = None, None
    split_seed = seed if config.split_seed is None else config.split_seed
    configs = [config.replace(seed=int(s), split_seed=split_seed) for s in member_seeds]
    if n_jobs == 1:
        results = [_train_member(X, y, c, perturb) for c in configs]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_train_member)(X, y, c, perturb) for c in configs)
    members = [r[0] for r in results]
    logs = [r[1] for r in results]
    return DeepEnsemble(members, adversarial=adversarial, epsilon=epsilon, seeds=[int(s) for s in member_seeds], logs=logs)


def quantize_ensemble(e):
    return DeepEnsemble([quantize(m) for m in e.members], e.adversarial, e.epsilon, list(e.seeds))


def save_ensemble(e, directory):
    """Write one ``member_XX.model.json`` per member plus ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, m in enumerate(e.members):
        name = f"member_{i:02d}.model.json"
        save_model(m, os.path.join(directory, name))
        names.append(name)
    manifest = {
        "format": "tlsnet.ensemble",
        "version": 1,
        "M": e.size,
        "adversarial": bool(e.adversarial),
        "epsilon": e.epsilon,
        "seeds": list(e.seeds),
        "precision_tag": e.precision_tag,
        "members": names,
    }
    atomic_write_text(os.path.join(directory, MANIFEST), json.dumps(manifest, indent=2))


def load_ensemble(directory):
    with open(os.path.join(directory, MANIFEST)) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "tlsnet.ensemble":
        raise ValueError(f"{directory} does not hold an ensemble manifest")
    members = [load_model(os.path.join(directory, name)) for name in manifest["members"]]
    if len(members) != manifest["M"]:
        raise ValueError("manifest member count does not match the member list")
    return DeepEnsemble(members, manifest["adversarial"], manifest["epsilon"], manifest["seeds"])


def ensemble_size_bytes(directory):
    return sum(
        os.path.getsize(os.path.join(directory, f))
        for f in os.listdir(directory)
        if f.endswith(".model.json")
    )


__all__ += ["ensemble_size_bytes", "TrainConfig"]
