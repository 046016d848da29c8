"""Synthetic designs, noise families, sparse truths and shard splitting."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr

from .losses import DataShard


@dataclass(frozen=True)
class ToeplitzAR:
    """Covariance ``rho^|j-k|``."""

    rho: float = 0.5

    def __post_init__(self):
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho!r}")


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Model2Block:
    """Unit diagonal, ``rho`` between distinct coordinates among the first ``s``."""

    s: int = 5
    rho: float = -0.2

    def __post_init__(self):
        # eigenvalues of the block are 1 - rho and 1 + (s - 1) rho
        if not (1.0 - self.rho > 0 and 1.0 + (self.s - 1) * self.rho > 0):
            raise ValueError(f"Model2Block(s={self.s}, rho={self.rho}) is not positive definite")

    def block(self):
        return (1.0 - self.rho) * np.eye(self.s) + self.rho * np.ones((self.s, self.s))


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0


@dataclass(frozen=True)
class StudentT:
    nu: float = 3.0


@dataclass(frozen=True)
class Cauchy:
    pass


@dataclass
class SyntheticTruth:
    theta_star: np.ndarray
    s: int
    task: str = "regression"  # regression | svm_probit | svm_mixture
    mu: np.ndarray | None = None

    @property
    def support(self):
        return np.flatnonzero(self.theta_star)


def sample_design(N, d, cov, rng):
    """``N`` i.i.d. rows from ``N(0, Sigma)``."""
    if N < 1 or d < 1:
        raise ValueError(f"invalid design size ({N}, {d})")
    Z = rng.standard_normal((N, d))
    if isinstance(cov, Identity):
        return Z
    if isinstance(cov, ToeplitzAR):
        rho = cov.rho
        c = math.sqrt(1.0 - rho * rho)
        X = np.empty((N, d))
        X[:, 0] = Z[:, 0]
        for j in range(1, d):
            X[:, j] = rho * X[:, j - 1] + c * Z[:, j]
        return X
    if isinstance(cov, Model2Block):
        if d < cov.s:
            raise ValueError(f"d={d} smaller than block size {cov.s}")
        L = np.linalg.cholesky(cov.block())
        Z[:, : cov.s] = Z[:, : cov.s] @ L.T
        return Z
    raise TypeError(f"unknown covariance spec {cov!r}")


def sample_noise(N, spec, rng):
    if N < 1:
        raise ValueError("N must be at least 1")
    if isinstance(spec, Gaussian):
        return spec.sigma * rng.standard_normal(N)
    if isinstance(spec, StudentT):
        z = rng.standard_normal(N)
        return z / np.sqrt(rng.chisquare(spec.nu, N) / spec.nu)
    if isinstance(spec, Cauchy):
        return np.tan(np.pi * (rng.random(N) - 0.5))
    raise TypeError(f"unknown noise spec {spec!r}")


def regression_truth(d, s=10):
    """``(0.2, 0.4, ..., 0.2 s, 0, ..., 0)``."""
    if d < s:
        raise ValueError(f"d={d} must be at least s={s}")
    theta = np.zeros(d)
    theta[:s] = 0.2 * np.arange(1, s + 1)
    return theta


def make_regression(N, d, cov, noise, rng):
    if d < 10:
        raise ValueError("regression truth needs d >= 10")
    theta = regression_truth(d)
    X = sample_design(N, d, cov, rng)
    eps = sample_noise(N, noise, rng) if noise is not None else np.zeros(N)
    y = X @ theta + eps
    return X, y, SyntheticTruth(theta, 10, "regression")


def probit_truth(d, s, rng):
    if d < s:
        raise ValueError(f"d={d} must be at least s={s}")
    theta = np.zeros(d)
    theta[:s] = rng.uniform(0.6, 1.2, size=s)
    return theta


def probit_labels(X, theta, rng):
    p = ndtr(X @ theta)
    return np.where(rng.random(X.shape[0]) < p, 1.0, -1.0)


def make_svm_probit(N, d, cov, rng, s=10, theta_star=None):
    """Model 1: ``P(y = 1 | x) = Phi(x^T theta*)`` with uniform(0.6, 1.2) nonzeros.

    Pass ``theta_star`` to draw a test set for an existing truth.
    """
    theta = probit_truth(d, s, rng) if theta_star is None else np.asarray(theta_star)
    X = sample_design(N, d, cov, rng)
    y = probit_labels(X, theta, rng)
    return X, y, SyntheticTruth(theta, int(np.count_nonzero(theta)), "svm_probit")


MIXTURE_MEAN = (0.1, 0.2, 0.3, 0.4, 0.5)
BAYES_WEIGHTS = (2.67, 2.83, 3.0, 3.17, 3.33)


def mixture_mean(d):
    if d < 5:
        raise ValueError("mixture model needs d >= 5")
    mu = np.zeros(d)
    mu[:5] = MIXTURE_MEAN
    return mu


def make_svm_mixture(N, d, rng):
    """Model 2: balanced mixture ``x | y ~ N(y mu, Sigma)``.

    The truth vector is the Bayes direction ``2 Sigma^{-1} mu``.
    """
    mu = mixture_mean(d)
    cov = Model2Block(5, -0.2)
    y = np.where(rng.random(N) < 0.5, 1.0, -1.0)
    X = sample_design(N, d, cov, rng) + y[:, None] * mu
    theta = np.zeros(d)
    theta[:5] = 2.0 * np.linalg.solve(cov.block(), mu[:5])
    return X, y, SyntheticTruth(theta, 5, "svm_mixture", mu)


def bayes_rule_mixture(X):
    """``sgn(2.67 x1 + 2.83 x2 + 3 x3 + 3.17 x4 + 3.33 x5)`` with sgn(0) = +1."""
    score = X[:, :5] @ np.asarray(BAYES_WEIGHTS)
    return np.where(score >= 0, 1.0, -1.0)


def shard_split(X, y, m, rng):
    """Shuffle rows, then cut into ``m`` contiguous equal blocks."""
    N = X.shape[0]
    if m < 1 or N % m != 0:
        raise ValueError(f"{N} rows cannot be split evenly across {m} workers")
    perm = rng.permutation(N)
    n = N // m
    return [DataShard(X[perm[k * n:(k + 1) * n]], y[perm[k * n:(k + 1) * n]]) for k in range(m)]
