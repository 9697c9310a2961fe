"""Experiment configuration (JSON) with validation.

Every experiment is a pure function of an :class:`ExperimentConfig` and its
``seed``.  Unknown keys are rejected so that typos surface as config errors
instead of silently falling back to defaults.
"""
from dataclasses import asdict, dataclass, field, fields
import hashlib
import json

from .exceptions import ConfigError
from .nn.training import TrainConfig


@dataclass
class PhysicsConfig:
    omega: float = 1.0
    gamma: float = 1.0
    prior_lo: float = 0.0
    prior_hi: float = 2.1


@dataclass
class DataConfig:
    n_train: int = 40_000
    n_delays: int = 48
    n_test_deltas: int = 40
    n_test: int = 1000
    generator: str = "analytic"
    cdf_points: int = 20_000
    jump_dt: float = 0.005


@dataclass
class NoiseConfig:
    train_sigma_tau: float = 0.0
    test_sigma_tau: float = 0.0
    sigma_y: float = 0.0


@dataclass
class EnsembleConfig:
    M: int = 10
    adversarial: bool = False
    epsilon: float = None


@dataclass
class BayesConfig:
    n_grid: int = 500
    chunk_size: int = 4096


@dataclass
class TunerConfig:
    n_trials: int = 20
    max_train: int = None
    max_epochs: int = None
    bins: tuple = (200, 710)
    losses: tuple = ("rmse", "msle")
    learning_rate: tuple = (1e-5, 5e-3)
    beta1: tuple = (0.8, 0.999)
    beta2: tuple = (0.8, 0.999)
    epochs: tuple = (50, 500)
    batch_sizes: tuple = (64, 128, 256, 512, 1024, 2048)
    dropout: tuple = (0.0, 0.2)
    patience: tuple = (4, 10)


@dataclass
class OodConfig:
    omega_list: tuple = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0)
    sigma_tau_list: tuple = (0.0, 0.25, 0.5, 0.76, 1.0)
    n_per_delta: int = 50


@dataclass
class TimingConfig:
    counts: tuple = (1, 10, 100, 1000)
    repeats: int = 10


_SECTIONS = {
    "physics": PhysicsConfig,
    "data": DataConfig,
    "noise": NoiseConfig,
    "model": TrainConfig,
    "ensemble": EnsembleConfig,
    "bayes": BayesConfig,
    "tuner": TunerConfig,
    "ood": OodConfig,
    "timing": TimingConfig,
}


@dataclass
class ExperimentConfig:
    seed: int = 0
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    data: DataConfig = field(default_factory=DataConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    model: TrainConfig = field(default_factory=TrainConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    bayes: BayesConfig = field(default_factory=BayesConfig)
    tuner: TunerConfig = field(default_factory=TunerConfig)
    ood: OodConfig = field(default_factory=OodConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)

    def __post_init__(self):
        validate(self)

    def to_dict(self):
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def with_seed(self, seed):
        d = self.to_dict()
        d["seed"] = int(seed)
        return ExperimentConfig.from_dict(d)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - {"seed", *_SECTIONS}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs = {}
        if "seed" in d:
            kwargs["seed"] = d["seed"]
        for name, section in _SECTIONS.items():
            if name not in d:
                continue
            sub = d[name]
            if not isinstance(sub, dict):
                raise ConfigError(f"section {name!r} must be an object")
            allowed = {f.name for f in fields(section)}
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
            clean = {k: tuple(v) if isinstance(v, list) else v for k, v in sub.items()}
            try:
                kwargs[name] = section(**clean)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {name!r} section: {exc}") from exc
        return cls(**kwargs)


def validate(c):
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(isinstance(c.seed, int) and c.seed >= 0, "seed must be a non-negative integer")
    p = c.physics
    need(p.gamma > 0, "physics.gamma must be positive")
    need(p.prior_lo < p.prior_hi, "physics.prior_lo must be below prior_hi")
    d = c.data
    for name in ("n_train", "n_delays", "n_test_deltas", "n_test", "cdf_points"):
        need(getattr(d, name) >= 1, f"data.{name} must be at least 1")
    need(d.generator in ("analytic", "jump"), "data.generator must be 'analytic' or 'jump'")
    need(0 < d.jump_dt <= 0.01, "data.jump_dt must lie in (0, 0.01]")
    n = c.noise
    need(min(n.train_sigma_tau, n.test_sigma_tau, n.sigma_y) >= 0, "noise levels must be non-negative")
    need(c.ensemble.M >= 1, "ensemble.M must be at least 1")
    need(c.ensemble.epsilon is None or c.ensemble.epsilon >= 0, "ensemble.epsilon must be non-negative")
    need(c.bayes.n_grid >= 2, "bayes.n_grid must be at least 2")
    t = c.tuner
    need(t.n_trials >= 1, "tuner.n_trials must be at least 1")
    need(c.timing.repeats >= 1, "timing.repeats must be at least 1")
    need(c.ood.n_per_delta >= 1, "ood.n_per_delta must be at least 1")


def load_config(path=None, overrides=None):
    """Read a JSON config file (or defaults) and apply dotted overrides."""
    if path is None:
        d = {}
    else:
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    for key, value in (overrides or {}).items():
        target = d
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return ExperimentConfig.from_dict(d)
