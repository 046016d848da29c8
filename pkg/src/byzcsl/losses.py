"""Loss families, per-residual derivatives and empirical (sub)gradients."""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels

DEFAULT_HUBER_A = 0.743


@dataclass(frozen=True)
class PseudoHuber:
    """Pseudo-Huber loss ``2/a^2 (sqrt(1 + a^2 r^2) - 1)``."""

    a: float = DEFAULT_HUBER_A

    def __post_init__(self):
        _check_positive("a", self.a)

    @property
    def curvature(self):
        # sup of the second derivative
        return 2.0


@dataclass(frozen=True)
class SmoothedQuantile:
    """Huber-smoothed check loss at level ``tau`` with bandwidth ``h``.

    Inside ``|u| < h/2`` the loss is the quadratic ``u^2/(2h) + u(tau - 1/2) + h/8``;
    outside it is the check loss ``u(tau - 1{u <= 0})``. The pieces meet with
    matching value and slope, so the loss is C^1 with second derivative ``1/h``
    in the band.
    """

    tau: float = 0.5
    h: float = 0.25

    def __post_init__(self):
        _check_unit_open("tau", self.tau)
        _check_positive("h", self.h)

    @property
    def curvature(self):
        return 1.0 / self.h


@dataclass(frozen=True)
class Hinge:
    """Hinge loss on the margin ``y x^T theta`` (no intercept)."""

    curvature = math.inf


def default_bandwidth(n, d, s=10):
    """Bandwidth heuristic ``max(0.05, sqrt(s log d / n))``."""
    return max(0.05, math.sqrt(s * math.log(d) / n))


@dataclass
class DataShard:
    """One worker's block of rows."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def check_labels(self):
        if not np.all((self.y == 1.0) | (self.y == -1.0)):
            raise ValueError("hinge loss needs labels in {-1, +1}")


def _check_positive(name, v):
    if not (np.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be a positive finite number, got {v!r}")


def _check_unit_open(name, v):
    if not (0.0 < v < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {v!r}")


def _finite(x, name="r"):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def pseudo_huber_value(a, r):
    _check_positive("a", a)
    x = _finite(r)
    return _unwrap(r, kernels.pseudo_huber_value(float(a), x))


def pseudo_huber_deriv(a, r):
    _check_positive("a", a)
    x = _finite(r)
    return _unwrap(r, kernels.pseudo_huber_deriv(float(a), x))


def smoothed_quantile_value(tau, h, u):
    _check_unit_open("tau", tau)
    _check_positive("h", h)
    x = _finite(u, "u")
    return _unwrap(u, kernels.smoothed_quantile_value(float(tau), float(h), x))


def smoothed_quantile_deriv(tau, h, u):
    _check_unit_open("tau", tau)
    _check_positive("h", h)
    x = _finite(u, "u")
    return _unwrap(u, kernels.smoothed_quantile_deriv(float(tau), float(h), x))


def check_loss(tau, u):
    """Raw quantile check loss ``u (tau - 1{u <= 0})``."""
    u = np.asarray(u, dtype=np.float64)
    return _unwrap(u, u * (tau - (u <= 0)))


def hinge_value(margin):
    m = _finite(margin, "margin")
    return _unwrap(margin, np.maximum(1.0 - m, 0.0))


def _check_dims(theta, shard):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] != shard.d:
        raise ValueError(
            f"theta has shape {theta.shape}, shard has {shard.d} features"
        )
    return theta


def residual_loss(model, r):
    """Per-sample loss values for a regression model."""
    if isinstance(model, PseudoHuber):
        return kernels.pseudo_huber_value(model.a, r)
    if isinstance(model, SmoothedQuantile):
        return kernels.smoothed_quantile_value(model.tau, model.h, r)
    raise TypeError(f"not a residual loss: {model!r}")


def residual_deriv(model, r):
    if isinstance(model, PseudoHuber):
        return kernels.pseudo_huber_deriv(model.a, r)
    if isinstance(model, SmoothedQuantile):
        return kernels.smoothed_quantile_deriv(model.tau, model.h, r)
    raise TypeError(f"not a residual loss: {model!r}")


def empirical_loss(model, theta, shard):
    """Average loss of ``theta`` over the rows of ``shard``."""
    theta = _check_dims(theta, shard)
    if isinstance(model, Hinge):
        margin = shard.y * (shard.X @ theta)
        return float(np.sum(np.maximum(1.0 - margin, 0.0)) / shard.n)
    r = shard.y - shard.X @ theta
    return float(np.sum(residual_loss(model, r)) / shard.n)


def empirical_gradient(model, theta, shard):
    """Gradient (subgradient for hinge) of :func:`empirical_loss` in ``theta``.

    At a hinge kink (margin exactly 1) the zero subgradient is taken.
    """
    theta = _check_dims(theta, shard)
    if isinstance(model, Hinge):
        margin = shard.y * (shard.X @ theta)
        w = np.where(margin < 1.0, shard.y, 0.0)
        return -(shard.X.T @ w) / shard.n
    r = shard.y - shard.X @ theta
    return -(shard.X.T @ residual_deriv(model, r)) / shard.n
