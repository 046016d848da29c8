"""Coordinate-wise robust aggregation of worker messages.

Messages are stacked into an ``(m, d)`` array, one row per worker. Order
statistics use a stable sort with NaN ranked as +inf, so ties resolve by
worker index and NaN is the first value trimmed from the top.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels


@dataclass(frozen=True)
class TrimmedMean:
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.beta < 0.5):
            raise ValueError(f"beta must lie in [0, 0.5), got {self.beta!r}")

    def __call__(self, batch):
        return trimmed_mean(batch, self.beta)


@dataclass(frozen=True)
class Median:
    def __call__(self, batch):
        return coordinate_median(batch)


@dataclass(frozen=True)
class Mean:
    def __call__(self, batch):
        return coordinate_mean(batch)


@dataclass(frozen=True)
class Quantile:
    level: float

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise ValueError(f"level must lie in (0, 1), got {self.level!r}")

    def __call__(self, batch):
        return coordinate_quantile(batch, self.level)


def as_batch(messages):
    """Stack a list of worker vectors (or pass through an array) as ``(m, d)``."""
    if isinstance(messages, np.ndarray):
        G = messages
    else:
        if len(messages) == 0:
            raise ValueError("empty message batch")
        dims = {np.shape(g) for g in messages}
        if len(dims) != 1:
            raise ValueError(f"messages have mixed shapes {sorted(dims)}")
        G = np.stack([np.asarray(g, dtype=np.float64) for g in messages])
    G = np.asarray(G, dtype=np.float64)
    if G.ndim == 1:
        G = G[:, None]
    if G.ndim != 2 or G.shape[0] == 0:
        raise ValueError(f"expected a non-empty (m, d) batch, got shape {G.shape}")
    return np.ascontiguousarray(G)


def trim_count(m, beta):
    """Number of values removed from each tail, ``floor(beta m)``."""
    # guard against beta*m landing just below an integer, e.g. 0.1 * 30
    return int(math.floor(beta * m + 1e-9))


def trimmed_mean(batch, beta):
    G = as_batch(batch)
    if not (0.0 <= beta < 0.5):
        raise ValueError(f"beta must lie in [0, 0.5), got {beta!r}")
    m = G.shape[0]
    b = trim_count(m, beta)
    if m - 2 * b < 1:
        raise ValueError(f"trimming {b} per tail leaves nothing of {m} messages")
    return kernels.trimmed_mean(G, b)


def coordinate_median(batch):
    """The ceil(m/2)-th order statistic per coordinate (lower middle for even m)."""
    G = as_batch(batch)
    m = G.shape[0]
    return kernels.order_statistic(G, (m + 1) // 2)


def coordinate_mean(batch):
    return kernels.column_mean(as_batch(batch))


def coordinate_quantile(batch, level):
    """The ceil(level m)-th order statistic per coordinate."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    G = as_batch(batch)
    m = G.shape[0]
    k = max(1, int(math.ceil(level * m - 1e-9)))
    return kernels.order_statistic(G, k)


def parse_rule(name, beta=None, level=None):
    """Build a rule from its CLI name: ``trimean``, ``median``, ``mean``, ``quantile``."""
    key = name.lower()
    if key in ("trimean", "trimmed_mean", "trmean"):
        if beta is None:
            raise ValueError("trimmed mean needs beta")
        return TrimmedMean(beta)
    if key == "median":
        return Median()
    if key == "mean":
        return Mean()
    if key == "quantile":
        if level is None:
            raise ValueError("quantile rule needs a level")
        return Quantile(level)
    raise ValueError(f"unknown aggregation rule {name!r}")
