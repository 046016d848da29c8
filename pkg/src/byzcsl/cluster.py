"""In-process simulation of the robust communication-efficient surrogate loop.

Each round the first machine broadcasts the current iterate, every worker
returns a gradient message (Byzantine workers return an attack message), the
first machine aggregates the messages coordinate-wise and solves the
L1-penalised surrogate problem shifted by the difference between its own
gradient and the aggregate.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import time
import warnings

import numpy as np

from . import rng as rngmod
from .aggregation import TrimmedMean, as_batch
from .attacks import NoAttack, SignFlip, byzantine_set
from .losses import empirical_gradient
from .solver import SolverSettings, SurrogateProblem, hard_project, solve_surrogate
from .tuning import BIC, bic_select, lambda_at_round

log = logging.getLogger(__name__)

PROJECTIONS = ("off", "top_s", "support_of_initial")


@dataclass
class ClusterSpec:
    model: object
    m: int
    alpha: float
    rule: object
    attack: object = field(default_factory=NoAttack)
    rounds: int = 10
    seed: int = 0
    projection: str = "off"
    projection_budget: int | None = None
    parallel: bool = False
    early_stop: float | None = None
    keep_messages: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one worker")
        if not (0.0 <= self.alpha < 0.5):
            raise ValueError(f"alpha must lie in [0, 0.5), got {self.alpha!r}")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        if self.projection == "top_s" and not self.projection_budget:
            raise ValueError("top_s projection needs projection_budget")
        if isinstance(self.rule, TrimmedMean) and self.rule.beta < self.alpha:
            warnings.warn(
                f"trimming level beta={self.rule.beta} is below the Byzantine fraction alpha={self.alpha}",
                stacklevel=2,
            )

    def byzantine(self):
        return byzantine_set(self.m, self.alpha, rngmod.stream(self.seed, rngmod.MEMBERSHIP))


@dataclass
class RoundTrace:
    t: int
    theta: np.ndarray
    lambda_t: float
    floats_uplinked: int
    floats_broadcast: int
    wall_time: float
    metrics: object = None
    kkt: float = float("nan")
    converged: bool = True
    messages: np.ndarray | None = field(default=None, repr=False)


def initial_estimate(model, shard1, lambda0, settings=None):
    """Penalised fit on the first machine's shard alone (zero shift)."""
    problem = SurrogateProblem(model, shard1, np.zeros(shard1.d), lambda0)
    return solve_surrogate(problem, settings).theta


def worker_messages(theta, spec, shards, byz, t):
    """The ``(m, d)`` batch of messages for iterate ``theta`` at round ``t``."""

    def message(k):
        attacked = k in byz and not isinstance(spec.attack, NoAttack)
        if attacked and not isinstance(spec.attack, SignFlip):
            rng = rngmod.stream(spec.seed, rngmod.ATTACK, k, t)
            return spec.attack.message(theta, rng)
        g = empirical_gradient(spec.model, theta, shards[k])
        return spec.attack.message(g) if attacked else g

    if spec.parallel and spec.m > 1:
        with ThreadPoolExecutor() as pool:
            msgs = list(pool.map(message, range(spec.m)))
    else:
        msgs = [message(k) for k in range(spec.m)]
    return as_batch(msgs)


def run_round(theta, spec, shards, lambda_next, t=0, byz=None, settings=None, support0=None):
    """One communication round; returns ``(theta_next, trace)``.

    ``lambda_next`` is a number, or a callable ``(shift, theta) -> lambda`` used
    for data-driven selection.
    """
    if len(shards) != spec.m:
        raise ValueError(f"{len(shards)} shards for {spec.m} workers")
    d = shards[0].d
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (d,) or any(s.d != d for s in shards):
        raise ValueError("inconsistent dimensions between iterate and shards")
    byz = spec.byzantine() if byz is None else byz
    start = time.perf_counter()

    G = worker_messages(theta, spec, shards, byz, t)
    agg = spec.rule(G)
    # machine 1 always corrects with its true local gradient
    g1 = G[0] if 0 not in byz else empirical_gradient(spec.model, theta, shards[0])
    shift = g1 - agg

    lam = lambda_next(shift, theta) if callable(lambda_next) else float(lambda_next)
    base = settings or SolverSettings()
    s = SolverSettings(**{**base.__dict__, "warm_start": theta})
    res = solve_surrogate(SurrogateProblem(spec.model, shards[0], shift, lam), s)
    if not res.converged:
        log.debug("round %d: solver stopped at KKT residual %.3g", t, res.kkt)
    theta_next = res.theta
    if spec.projection == "top_s":
        theta_next = hard_project(theta_next, int(spec.projection_budget))
    elif spec.projection == "support_of_initial" and support0 is not None:
        theta_next = hard_project(theta_next, support0)

    trace = RoundTrace(
        t=t + 1,
        theta=theta_next,
        lambda_t=lam,
        floats_uplinked=spec.m * d,
        floats_broadcast=(spec.m - 1) * d,
        wall_time=time.perf_counter() - start,
        kkt=res.kkt,
        converged=res.converged,
        messages=G if spec.keep_messages else None,
    )
    return theta_next, trace


def run_algorithm(spec, shards, schedule, theta0, ctx=None, evaluate=None, settings=None, bic_n=None):
    """Run ``spec.rounds`` rounds from ``theta0``; returns one trace per round.

    ``evaluate`` (optional) maps an iterate to a metrics object stored on its trace.
    """
    byz = spec.byzantine()
    theta = np.asarray(theta0, dtype=np.float64).copy()
    support0 = np.flatnonzero(theta)
    traces = []
    for t in range(spec.rounds):
        if isinstance(schedule, BIC):
            def lam(shift, anchor, _grid=schedule.grid):
                return bic_select(spec.model, shards[0], shift, _grid, anchor=anchor,
                                  n_eff=bic_n, settings=settings)
        else:
            lam = lambda_at_round(schedule, t + 1, ctx)
        theta_next, trace = run_round(theta, spec, shards, lam, t=t, byz=byz,
                                      settings=settings, support0=support0)
        if evaluate is not None:
            trace.metrics = evaluate(theta_next)
        traces.append(trace)
        if spec.early_stop is not None:
            change = np.linalg.norm(theta_next - theta) / max(np.linalg.norm(theta), 1e-12)
            theta = theta_next
            if change < spec.early_stop:
                break
        else:
            theta = theta_next
    return traces
