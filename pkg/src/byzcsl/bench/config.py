"""Experiment configuration: INI recipe files plus command-line overrides."""
from dataclasses import dataclass, fields, replace
import configparser
import os

TASKS = ("pseudo_huber", "quantile", "svm_probit", "svm_mixture", "real_regression", "real_svm")
AGGS = ("trimean", "median", "mean")
ATTACKS = ("sign_flip", "random", "zero", "none")
LAMBDA_MODES = ("theory", "theory_constant", "bic", "fixed")
NOISES = ("gaussian", "t3", "t2.1", "cauchy")


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


def _csv_list(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return tuple(s.strip() for s in str(v).split(",") if s.strip())


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


@dataclass
class ExperimentConfig:
    task: str = "pseudo_huber"
    n: int = 200
    m: int = 50
    d: int = 500
    alpha: float = 0.0
    beta: float | None = None  # defaults to alpha
    attack: str = "sign_flip"
    variance: float = 5.0
    agg: tuple = ("trimean", "median")
    estimators: tuple = ("global", "local")
    rounds: int = 10
    reps: int = 20
    seed: int = 2024
    lambda_mode: str = "theory"
    c1: float = 4.5
    c2: float = 1.0
    c3: float = 2.0
    lambda_value: float | None = None
    grid_size: int = 15
    grid_ratio: float = 0.01
    a: float = 0.743
    tau: float = 0.5
    h: float | None = None
    noise: str = "gaussian"
    sigma: float = 1.0
    rho: float = 0.5
    s: int = 10
    data: str | None = None
    test_data: str | None = None
    target: str | None = None
    log1p_target: bool = False
    test_fraction: float = 0.2
    parallel: bool = False
    jobs: int = 1
    projection: str = "off"
    out: str | None = None

    @property
    def trim_level(self):
        return self.alpha if self.beta is None else self.beta

    @property
    def N(self):
        return self.n * self.m

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(name, msg)

        need(self.task in TASKS, "task", f"must be one of {TASKS}")
        for name in ("n", "m", "d", "reps"):
            need(getattr(self, name) >= 1, name, "must be a positive integer")
        need(self.rounds >= 0, "rounds", "must be nonnegative")
        need(0.0 <= self.alpha < 0.5, "alpha", "must lie in [0, 0.5)")
        need(0.0 <= self.trim_level < 0.5, "beta", "must lie in [0, 0.5)")
        need(self.attack in ATTACKS, "attack", f"must be one of {ATTACKS}")
        need(self.variance > 0, "variance", "must be positive")
        for a in self.agg:
            need(a in AGGS, "agg", f"unknown aggregator {a!r}; choose from {AGGS}")
        for e in self.estimators:
            need(e in ("global", "local"), "estimators", f"unknown estimator {e!r}")
        need(self.lambda_mode in LAMBDA_MODES, "lambda_mode", f"must be one of {LAMBDA_MODES}")
        if self.lambda_mode == "fixed":
            need(self.lambda_value is not None and self.lambda_value > 0, "lambda_value",
                 "fixed mode needs a positive lambda_value")
        for name in ("c1", "c3", "a", "sigma"):
            need(getattr(self, name) > 0, name, "must be positive")
        need(self.c2 >= 0, "c2", "must be nonnegative")
        need(0.0 < self.tau < 1.0, "tau", "must lie in (0, 1)")
        need(self.h is None or self.h > 0, "h", "must be positive")
        need(self.noise in NOISES, "noise", f"must be one of {NOISES}")
        need(-1.0 < self.rho < 1.0, "rho", "must lie in (-1, 1)")
        need(self.jobs >= 1, "jobs", "must be at least 1")
        need(self.projection in ("off", "top_s", "support_of_initial"), "projection", "unknown policy")
        need(self.grid_size >= 1 and 0 < self.grid_ratio < 1, "grid_size", "invalid BIC grid")
        if self.task in ("pseudo_huber", "quantile"):
            need(self.d >= 10, "d", "regression truth needs d >= 10")
        if self.task == "svm_probit":
            need(self.d >= self.s, "s", "sparsity exceeds dimension")
        if self.task == "svm_mixture":
            need(self.d >= 5, "d", "mixture model needs d >= 5")
        if self.task.startswith("real_"):
            need(self.data is not None, "data", "real-data tasks need a data path")
            need(os.path.exists(self.data), "data", f"file not found: {self.data}")
            if self.test_data is not None:
                need(os.path.exists(self.test_data), "test_data", f"file not found: {self.test_data}")
            need(0.0 < self.test_fraction < 1.0, "test_fraction", "must lie in (0, 1)")
        if self.task == "real_regression":
            need(self.target is not None, "target", "real_regression needs a target column")
        return self


def _converter(f):
    name = f.name
    if name in ("agg", "estimators"):
        return _csv_list
    if name in ("log1p_target", "parallel"):
        return _bool
    if name in ("n", "m", "d", "rounds", "reps", "seed", "grid_size", "s", "jobs"):
        return int
    if name in ("task", "attack", "lambda_mode", "noise", "data", "test_data", "target", "out", "projection"):
        return str
    return float


def coerce(name, value):
    fmap = {f.name: f for f in fields(ExperimentConfig)}
    if name not in fmap:
        raise ConfigError(name, "unknown configuration key")
    if value is None:
        return None
    try:
        return _converter(fmap[name])(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"bad value {value!r} ({exc})") from None


def load_config(path=None, overrides=None):
    """Read ``[experiment]`` from an INI file and apply overrides (unvalidated)."""
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError("config", f"file not found: {path}")
        parser = configparser.ConfigParser()
        parser.read(path, encoding="utf-8")
        if "experiment" not in parser:
            raise ConfigError("config", "missing [experiment] section")
        base = os.path.dirname(os.path.abspath(path))
        for k, v in parser["experiment"].items():
            k = k.replace("-", "_")
            values[k] = coerce(k, v)
            if k in ("data", "test_data") and not os.path.isabs(values[k]):
                values[k] = os.path.normpath(os.path.join(base, values[k]))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = coerce(k, v)
    return ExperimentConfig(**values)


def with_value(cfg, axis, value):
    """Copy of ``cfg`` with one swept field changed."""
    value = coerce(axis, value)
    if axis == "alpha" and cfg.beta is None:
        return replace(cfg, alpha=value)
    return replace(cfg, **{axis: value})


def config_dict(cfg):
    return {f.name: (list(v) if isinstance(v := getattr(cfg, f.name), tuple) else v) for f in fields(cfg)}
