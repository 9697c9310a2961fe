"""Detuning estimation for a driven two-level emitter from photon delay records."""
from .bayes import GridBayesEstimator, biased_crb, fisher_information, grid_posterior
from .config import ExperimentConfig, load_config
from .datasets import generate_dataset, generate_trajectories, load_dataset
from .ensemble import DeepEnsemble, load_ensemble, save_ensemble, train_ensemble
from .estimators import DeepEnsembleRegressor, HistogramFeatures, HistogramMLPRegressor
from .exceptions import ConfigError, DomainError, NumericalDiagnostic, TlsnetError
from .physics import TlsParams, Trajectory, delay_pdf, sample_delays_analytic, sample_delays_jump

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "load_config",
    "TlsParams",
    "Trajectory",
    "delay_pdf",
    "sample_delays_analytic",
    "sample_delays_jump",
    "grid_posterior",
    "fisher_information",
    "biased_crb",
    "GridBayesEstimator",
    "HistogramFeatures",
    "HistogramMLPRegressor",
    "DeepEnsembleRegressor",
    "DeepEnsemble",
    "train_ensemble",
    "save_ensemble",
    "load_ensemble",
    "generate_trajectories",
    "generate_dataset",
    "load_dataset",
    "TlsnetError",
    "DomainError",
    "NumericalDiagnostic",
    "ConfigError",
]
