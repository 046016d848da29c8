"""L1-penalised surrogate solver run on the first machine.

The problem is ``min_theta  L_1(theta) - <shift, theta> + lam * ||theta||_1`` where
``L_1`` is the empirical loss on machine 1's shard. Smooth losses are solved by
monotone accelerated proximal gradient with backtracking; the hinge loss turns
the problem into a linear program, solved exactly with HiGHS.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, hstack, identity

from .losses import DataShard, Hinge, empirical_gradient, empirical_loss


class SolverDivergence(RuntimeError):
    """The surrogate objective became non-finite or unbounded below."""


@dataclass
class SurrogateProblem:
    model: object
    shard: DataShard
    shift: np.ndarray
    lam: float

    def __post_init__(self):
        self.shift = np.asarray(self.shift, dtype=np.float64)
        if self.shift.shape != (self.shard.d,):
            raise ValueError(
                f"shift has shape {self.shift.shape}, shard has {self.shard.d} features"
            )
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam!r}")
        if not np.all(np.isfinite(self.shift)):
            raise SolverDivergence("non-finite surrogate shift")

    def smooth_value(self, theta):
        return empirical_loss(self.model, theta, self.shard) - float(self.shift @ theta)

    def smooth_grad(self, theta):
        return empirical_gradient(self.model, theta, self.shard) - self.shift

    def objective(self, theta):
        return self.smooth_value(theta) + self.lam * float(np.sum(np.abs(theta)))


@dataclass
class SolverSettings:
    max_iters: int = 5000
    tol: float = 1e-7
    step_rule: str = "backtracking"  # or "fixed"
    eta: float | None = None  # initial (or fixed) step; default from curvature bound
    shrink: float = 0.5
    accelerate: bool = True
    warm_start: np.ndarray | None = None
    check_every: int = 5
    # iterates beyond this sup-norm are taken as a sign the surrogate is unbounded
    divergence_norm: float = 1e6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not (0 < self.shrink < 1):
            raise ValueError("shrink must lie in (0, 1)")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.step_rule not in ("backtracking", "fixed"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class SolveResult:
    theta: np.ndarray
    kkt: float
    iterations: int
    converged: bool
    objective: float
    history: list = field(default_factory=list, repr=False)


def soft_threshold(v, t):
    """``sign(v) * max(|v| - t, 0)``, elementwise."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def gram_norm(shard, iters=50):
    """Power-iteration estimate of the largest eigenvalue of ``X^T X / n``."""
    cached = getattr(shard, "_gram_norm", None)
    if cached is not None:
        return cached
    X = shard.X
    v = np.ones(shard.d) / math.sqrt(shard.d)
    est = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v) / shard.n
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        v = w / nw
        est = nw
    # slack for the power-iteration underestimate
    shard._gram_norm = 1.05 * est
    return shard._gram_norm


def kkt_residual(problem, theta):
    """Largest violation of the L1 stationarity conditions at ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (problem.shard.d,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({problem.shard.d},)")
    if isinstance(problem.model, Hinge):
        return _hinge_kkt(problem, theta)
    g = problem.smooth_grad(theta)
    return _kkt_from_grad(g, theta, problem.lam)


def _kkt_from_grad(g, theta, lam):
    nz = theta != 0
    viol = np.where(nz, np.abs(g + lam * np.sign(theta)), np.maximum(np.abs(g) - lam, 0.0))
    return float(np.max(viol)) if viol.size else 0.0


def _hinge_kkt(problem, theta, kink_tol=1e-9):
    # The hinge subdifferential at samples sitting on the kink is an interval;
    # pick the multipliers that minimise the worst violation (a small LP).
    X, y, n, lam = problem.shard.X, problem.shard.y, problem.shard.n, problem.lam
    margin = y * (X @ theta)
    active = margin < 1.0 - kink_tol
    kink = np.abs(margin - 1.0) <= kink_tol
    g0 = -(X.T @ np.where(active, y, 0.0)) / n - problem.shift
    nz = theta != 0
    target = np.where(nz, -lam * np.sign(theta), 0.0)
    slack = np.where(nz, 0.0, lam)
    if not kink.any():
        return float(np.max(np.maximum(np.abs(g0 - target) - slack, 0.0)))
    A = -(X[kink] * y[kink, None]).T / n  # d x k, gradient contribution per unit multiplier
    k = A.shape[1]
    d = theta.shape[0]
    # variables: c (k) in [0, 1], t >= 0; minimise t
    # |g0 + A c - target| <= slack + t
    A_ub = np.vstack([
        np.hstack([A, -np.ones((d, 1))]),
        np.hstack([-A, -np.ones((d, 1))]),
    ])
    b_ub = np.concatenate([slack - (g0 - target), slack + (g0 - target)])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(0, 1)] * k + [(0, None)], method="highs")
    if res.status != 0:
        raise SolverDivergence(f"hinge KKT certificate LP failed: {res.message}")
    return float(res.x[-1])


def solve_surrogate(problem, settings=None):
    """Minimise the penalised surrogate objective.

    Returns a :class:`SolveResult`; ``converged`` is set when the KKT residual
    reached ``settings.tol``. Raises :class:`SolverDivergence` when the
    objective turns non-finite or (hinge) the LP is unbounded.
    """
    settings = settings or SolverSettings()
    if isinstance(problem.model, Hinge):
        return _solve_hinge_lp(problem, settings)
    return _solve_prox_grad(problem, settings)


def _solve_prox_grad(problem, s):
    d = problem.shard.d
    lam = problem.lam
    x = np.zeros(d) if s.warm_start is None else np.array(s.warm_start, dtype=np.float64)
    if x.shape != (d,):
        raise ValueError(f"warm start has shape {x.shape}, expected ({d},)")
    if s.eta is not None:
        L = 1.0 / s.eta
    else:
        L = problem.model.curvature * gram_norm(problem.shard)
        if L <= 0:
            L = 1.0

    Fx = problem.objective(x)
    if not math.isfinite(Fx):
        raise SolverDivergence("non-finite objective at the starting point")
    history = [Fx]
    res = _kkt_from_grad(problem.smooth_grad(x), x, lam)
    if res <= s.tol:
        return SolveResult(x, res, 0, True, Fx, history)

    y = x.copy()
    t = 1.0
    it = 0
    for it in range(1, s.max_iters + 1):
        fy = problem.smooth_value(y)
        gy = problem.smooth_grad(y)
        while True:
            z = soft_threshold(y - gy / L, lam / L)
            fz = problem.smooth_value(z)
            if not math.isfinite(fz):
                raise SolverDivergence("non-finite objective during proximal step")
            dz = z - y
            if s.step_rule == "fixed":
                break
            if fz <= fy + float(gy @ dz) + 0.5 * L * float(dz @ dz) + 1e-12 * abs(fy):
                break
            L /= s.shrink
        if float(np.max(np.abs(z), initial=0.0)) > s.divergence_norm:
            raise SolverDivergence("iterates escaped; the surrogate looks unbounded below")
        Fz = fz + lam * float(np.sum(np.abs(z)))
        x_new = z if Fz <= Fx else x
        F_new = min(Fz, Fx)
        if s.accelerate:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            y = x_new
        x, Fx = x_new, F_new
        history.append(Fx)
        if it % s.check_every == 0:
            res = _kkt_from_grad(problem.smooth_grad(x), x, lam)
            if res <= s.tol:
                return SolveResult(x, res, it, True, Fx, history)
    res = _kkt_from_grad(problem.smooth_grad(x), x, lam)
    return SolveResult(x, res, it, res <= s.tol, Fx, history)


def _solve_hinge_lp(problem, s):
    shard = problem.shard
    shard.check_labels()
    n, d, lam = shard.n, shard.d, problem.lam
    # variables [theta+ (d), theta- (d), xi (n)], all >= 0
    cost = np.concatenate([lam - problem.shift, lam + problem.shift, np.full(n, 1.0 / n)])
    YX = csr_matrix(shard.X * shard.y[:, None])
    # -y x^T (theta+ - theta-) - xi <= -1
    A_ub = hstack([-YX, YX, -identity(n, format="csr")], format="csr")
    b_ub = -np.ones(n)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs-ds")
    if res.status == 3:
        raise SolverDivergence("surrogate hinge objective is unbounded below")
    if res.status != 0:
        raise SolverDivergence(f"hinge LP failed: {res.message}")
    theta = res.x[:d] - res.x[d:2 * d]
    # clear round-off left by the simplex basis
    theta[np.abs(theta) < 1e-12] = 0.0
    kkt = kkt_residual(problem, theta)
    return SolveResult(theta, kkt, int(getattr(res, "nit", 0)), kkt <= s.tol, problem.objective(theta))


def hard_project(theta, support):
    """Zero every coordinate outside ``support``.

    ``support`` is either an integer budget (keep the largest entries by
    absolute value, ties to the lower index) or an explicit index collection.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size == 0:
        raise ValueError("empty parameter vector")
    out = np.zeros_like(theta)
    if np.ndim(support) == 0 and isinstance(support, (int, np.integer)):
        k = int(support)
        if not (0 <= k <= theta.size):
            raise ValueError(f"budget {k} outside [0, {theta.size}]")
        idx = np.argsort(-np.abs(theta), kind="stable")[:k]
    else:
        idx = np.asarray(sorted(support), dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= theta.size):
            raise ValueError("support index out of range")
    out[idx] = theta[idx]
    return out
