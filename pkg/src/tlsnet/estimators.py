"""scikit-learn style wrappers around the network, ensemble and histogram layer.

``X`` is a collection of delay records: a 2-D array ``(n_records, n_delays)``
or a ragged sequence of 1-D arrays.  Predictions are detuning estimates.
"""
import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import ensemble as _ens
from ._validation import check_delay_sets, check_targets
from .nn.histogram import HistogramLayerParams, hist_forward_sets
from .nn.network import HIDDEN, predict as _predict
from .nn.training import TrainConfig, train


class HistogramFeatures(TransformerMixin, BaseEstimator):
    """Fixed-bandwidth smoothed histogram of every delay record.

    Parameters
    ----------
    n_bins : int
    tau_min, tau_max : float
        Range of the equally spaced bin centers.
    bandwidth : float, optional
        Kernel standard deviation; defaults to two bin widths.
    """

    def __init__(self, n_bins=256, tau_min=0.0, tau_max=100.0, bandwidth=None):
        self.n_bins = n_bins
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.bandwidth = bandwidth

    def fit(self, X=None, y=None):
        log_bw = None if self.bandwidth is None else 2.0 * math.log(self.bandwidth)
        self.histogram_ = HistogramLayerParams(int(self.n_bins), self.tau_min, self.tau_max, log_bw)
        return self

    def transform(self, X):
        check_is_fitted(self, "histogram_")
        return hist_forward_sets(check_delay_sets(X), self.histogram_)


class _NetworkParams:
    def _train_config(self, loss, seed):
        return TrainConfig(
            n_bins=self.n_bins,
            loss=loss,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epochs=self.epochs,
            batch_size=self.batch_size,
            dropout=self.dropout,
            patience=self.patience,
            validation_fraction=self.validation_fraction,
            seed=seed,
            hidden=self.hidden,
            tau_min=self.tau_min,
            tau_max=self.tau_max,
        )


class HistogramMLPRegressor(_NetworkParams, RegressorMixin, BaseEstimator):
    """Single histogram-input network.

    ``loss`` selects the head: ``"rmse"`` / ``"msle"`` train a point
    estimator, ``"gaussian_nll"`` a mean/variance network.
    """

    def __init__(self, n_bins=256, loss="rmse", learning_rate=1e-3, beta1=0.9, beta2=0.999, epochs=100,
                 batch_size=256, dropout=0.0, patience=10, validation_fraction=0.2, hidden=HIDDEN,
                 tau_min=0.0, tau_max=100.0, random_state=0):
        self.n_bins = n_bins
        self.loss = loss
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout = dropout
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.hidden = hidden
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.random_state = random_state

    def fit(self, X, y):
        ds = check_delay_sets(X)
        y = check_targets(y, ds.n_sets)
        self.model_, self.log_ = train(ds, y, self._train_config(self.loss, int(self.random_state)))
        return self

    @classmethod
    def from_model(cls, model):
        est = cls(n_bins=model.n_bins, loss="gaussian_nll" if model.head == "gaussian" else "rmse")
        est.model_ = model
        return est

    def predict(self, X):
        check_is_fitted(self, "model_")
        out = _predict(self.model_, check_delay_sets(X))
        return out[0] if self.model_.head == "gaussian" else out

    def predict_dist(self, X):
        """``(mu, sigma2)``; only for Gaussian-head models."""
        check_is_fitted(self, "model_")
        if self.model_.head != "gaussian":
            raise ValueError("predict_dist needs a Gaussian-head model")
        return _predict(self.model_, check_delay_sets(X))


class DeepEnsembleRegressor(_NetworkParams, RegressorMixin, BaseEstimator):
    """Evenly weighted mixture of ``n_members`` Gaussian-head networks."""

    def __init__(self, n_members=10, adversarial=False, epsilon=None, n_bins=256, learning_rate=1e-3, beta1=0.9,
                 beta2=0.999, epochs=100, batch_size=256, dropout=0.0, patience=10, validation_fraction=0.2,
                 hidden=HIDDEN, tau_min=0.0, tau_max=100.0, random_state=0, n_jobs=1):
        self.n_members = n_members
        self.adversarial = adversarial
        self.epsilon = epsilon
        self.n_bins = n_bins
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout = dropout
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.hidden = hidden
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        ds = check_delay_sets(X)
        y = check_targets(y, ds.n_sets)
        seed = int(self.random_state)
        config = self._train_config("gaussian_nll", seed)
        self.ensemble_ = _ens.train_ensemble(
            ds, y, config, M=self.n_members, adversarial=self.adversarial, epsilon=self.epsilon,
            seed=seed, n_jobs=self.n_jobs,
        )
        return self

    @classmethod
    def from_ensemble(cls, ensemble):
        est = cls(n_members=ensemble.size, adversarial=ensemble.adversarial, epsilon=ensemble.epsilon,
                  n_bins=ensemble.members[0].n_bins)
        est.ensemble_ = ensemble
        return est

    def predict_dist(self, X):
        check_is_fitted(self, "ensemble_")
        return _ens.predict(self.ensemble_, check_delay_sets(X))

    def predict(self, X, return_std=False):
        p = self.predict_dist(X)
        return (p.mu, np.sqrt(p.sigma2)) if return_std else p.mu
