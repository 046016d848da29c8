"""Regularisation schedules, BIC-type selection, and evaluation metrics."""
from dataclasses import dataclass
import math

import numpy as np

from .losses import empirical_loss
from .solver import SolverDivergence, SolverSettings, SurrogateProblem, solve_surrogate


@dataclass
class ScheduleContext:
    n: int
    N: int
    d: int
    beta: float = 0.0
    alpha: float = 0.0
    s_estimate: int = 10

    def __post_init__(self):
        if self.n < 1 or self.N < 1 or self.d < 2:
            raise ValueError(f"unpopulated schedule context {self!r}")


@dataclass
class TheoryOptionI:
    """``c1 sqrt(log d / N) + c2 beta sqrt(log d / n)``, constant in t."""

    c1: float = 0.5
    c2: float = 0.5


@dataclass
class TheoryOptionII:
    """Adds ``c3 sqrt(log d / n) kappa^t`` to an alpha-driven floor.

    ``kappa`` defaults to ``sqrt(s log d / n)`` clipped to (0, 0.9].
    """

    c1: float = 0.5
    c2: float = 0.5
    c3: float = 0.5
    kappa: float | None = None


@dataclass
class BIC:
    grid: tuple


@dataclass
class Fixed:
    value: float


def _check_positive(**kw):
    for k, v in kw.items():
        if v is not None and not v > 0:
            raise ValueError(f"{k} must be positive, got {v!r}")


def kappa_for(schedule, ctx):
    if schedule.kappa is not None:
        if not (0 < schedule.kappa < 1):
            raise ValueError("kappa must lie in (0, 1)")
        return schedule.kappa
    k = math.sqrt(ctx.s_estimate * math.log(ctx.d) / ctx.n)
    return min(max(k, 1e-12), 0.9)


def lambda_at_round(schedule, t, ctx=None, select=None):
    """Penalty level for round ``t`` (the lambda used to compute iterate t).

    ``select`` is a callable ``grid -> lambda`` and is required for BIC schedules.
    """
    if isinstance(schedule, Fixed):
        _check_positive(value=schedule.value)
        return float(schedule.value)
    if isinstance(schedule, BIC):
        if select is None:
            raise ValueError("BIC schedule needs a selection callback")
        return float(select(schedule.grid))
    if ctx is None:
        raise ValueError("theory schedules need a populated context")
    logd = math.log(ctx.d)
    if isinstance(schedule, TheoryOptionI):
        _check_positive(c1=schedule.c1)
        return schedule.c1 * math.sqrt(logd / ctx.N) + schedule.c2 * ctx.beta * math.sqrt(logd / ctx.n)
    if isinstance(schedule, TheoryOptionII):
        _check_positive(c1=schedule.c1, c3=schedule.c3)
        kappa = kappa_for(schedule, ctx)
        return (
            schedule.c1 * math.sqrt(logd / ctx.N)
            + schedule.c2 * ctx.alpha / math.sqrt(ctx.n)
            + schedule.c3 * math.sqrt(logd / ctx.n) * kappa**t
        )
    raise TypeError(f"unknown schedule {schedule!r}")


def default_grid(lam_max, num=20, ratio=1e-3):
    """Log-spaced grid from ``lam_max`` down to ``ratio * lam_max``."""
    return tuple(np.geomspace(lam_max, lam_max * ratio, num))


def bic_score(loss_value, support_size, n, d):
    return math.log(max(loss_value, 1e-12)) + support_size * math.log(n) * math.log(math.log(d)) / n


def bic_select(model, shard, shift, grid, anchor=None, n_eff=None, settings=None, return_path=False):
    """Pick the grid value minimising the BIC-type score.

    The loss term is the surrogate loss anchored at ``anchor`` (the current
    iterate), ``L_1(theta) - <shift, theta - anchor>``; with a zero shift it is
    the plain empirical loss. Grid values are solved from largest to smallest
    with warm starts; ties go to the larger lambda.
    """
    if len(grid) == 0:
        raise ValueError("empty lambda grid")
    d = shard.d
    n = shard.n if n_eff is None else n_eff
    shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=np.float64)
    anchor = np.zeros(d) if anchor is None else np.asarray(anchor, dtype=np.float64)
    base = settings or SolverSettings()
    order = sorted(range(len(grid)), key=lambda i: -grid[i])
    warm = None
    scores = [math.inf] * len(grid)
    thetas = [None] * len(grid)
    for i in order:
        s = SolverSettings(**{**base.__dict__, "warm_start": warm})
        try:
            res = solve_surrogate(SurrogateProblem(model, shard, shift, float(grid[i])), s)
        except SolverDivergence:
            continue
        theta = res.theta
        warm = theta
        loss = empirical_loss(model, theta, shard) - float(shift @ (theta - anchor))
        scores[i] = bic_score(loss, int(np.count_nonzero(theta)), n, d)
        thetas[i] = theta
    if all(math.isinf(v) for v in scores):
        raise SolverDivergence("every BIC grid solve failed")
    best = min(order, key=lambda i: (scores[i], -grid[i]))
    if return_path:
        return float(grid[best]), scores, thetas
    return float(grid[best])


@dataclass
class MetricsReport:
    l2_error: float
    l1_error: float
    fp: int
    fn: int
    f1: float
    accuracy: float | None = None
    mse: float | None = None


def support_f1(tp, fp, fn):
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def estimation_metrics(theta_hat, theta_star):
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    if theta_hat.shape != theta_star.shape:
        raise ValueError(f"shape mismatch {theta_hat.shape} vs {theta_star.shape}")
    diff = theta_hat - theta_star
    est = theta_hat != 0
    true = theta_star != 0
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true))
    fn = int(np.sum(~est & true))
    return MetricsReport(
        l2_error=float(np.linalg.norm(diff)),
        l1_error=float(np.sum(np.abs(diff))),
        fp=fp,
        fn=fn,
        f1=support_f1(tp, fp, fn),
        mse=parameter_mse(theta_hat, theta_star),
    )


def classification_metrics(theta_hat, test):
    """Test accuracy of ``sgn(x^T theta)`` with sgn(0) = +1."""
    if test.n == 0:
        raise ValueError("empty test set")
    pred = np.where(test.X @ np.asarray(theta_hat) >= 0, 1.0, -1.0)
    return float(np.mean(pred == test.y))


def parameter_mse(theta_hat, theta_star):
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    if theta_hat.shape != theta_star.shape:
        raise ValueError(f"shape mismatch {theta_hat.shape} vs {theta_star.shape}")
    return float(np.mean((theta_hat - theta_star) ** 2))


def prediction_mse(theta_hat, test):
    return float(np.mean((test.y - test.X @ np.asarray(theta_hat)) ** 2))
