"""Messages sent by Byzantine workers in place of their true gradient."""
from dataclasses import dataclass

import numpy as np

REAL_DATA_VARIANCE = 5.0


@dataclass(frozen=True)
class SignFlip:
    def message(self, g, rng=None):
        return sign_flip(g)


@dataclass(frozen=True)
class RandomGaussian:
    variance: float = REAL_DATA_VARIANCE

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance!r}")

    def message(self, g, rng=None):
        return random_gaussian(np.shape(g)[0], self.variance, rng)


@dataclass(frozen=True)
class ZeroMessage:
    def message(self, g, rng=None):
        return zero_message(np.shape(g)[0])


@dataclass(frozen=True)
class NoAttack:
    def message(self, g, rng=None):
        return g


def sign_flip(g):
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("sign flip expects a finite gradient")
    return -g


def random_gaussian(d, variance, rng):
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return rng.normal(0.0, np.sqrt(variance), size=d)


def zero_message(d):
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return np.zeros(d)


def parse_attack(name, variance=REAL_DATA_VARIANCE):
    key = name.lower().replace("-", "_")
    if key in ("sign_flip", "signflip", "sign"):
        return SignFlip()
    if key in ("random", "gaussian", "random_gaussian"):
        return RandomGaussian(variance)
    if key in ("zero", "zero_message"):
        return ZeroMessage()
    if key in ("none", "no"):
        return NoAttack()
    raise ValueError(f"unknown attack {name!r}")


def attack_name(attack):
    return {
        SignFlip: "sign_flip",
        RandomGaussian: "random",
        ZeroMessage: "zero",
        NoAttack: "none",
    }[type(attack)]


def byzantine_set(m, alpha, rng):
    """Indices of the ``floor(alpha m)`` Byzantine workers, fixed for a run.

    ``rng`` must be the run's dedicated membership stream.
    """
    if not (0.0 <= alpha < 0.5):
        raise ValueError(f"alpha must lie in [0, 0.5), got {alpha!r}")
    nb = int(np.floor(alpha * m + 1e-9))
    perm = rng.permutation(m)
    return frozenset(int(k) for k in perm[:nb])
