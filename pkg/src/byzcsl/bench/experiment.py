"""Replicated experiment runner producing long-format CSV rows and a summary."""
from concurrent.futures import ProcessPoolExecutor
import logging
import math
import time

import numpy as np
from scipy import stats

from .. import rng as R
from ..aggregation import Mean, Median, TrimmedMean
from ..attacks import parse_attack
from ..cluster import ClusterSpec, initial_estimate, run_algorithm
from ..data_io import (
    CSV_COLUMNS,
    TabularDataset,
    parse_libsvm,
    parse_numeric_csv,
    standardize_fit_apply,
    write_results_csv,
    write_summary_json,
)
from ..losses import DataShard, Hinge, PseudoHuber, SmoothedQuantile, default_bandwidth, empirical_gradient
from ..solver import SolverDivergence, SurrogateProblem, solve_surrogate
from ..synthetic import (
    Cauchy,
    Gaussian,
    StudentT,
    ToeplitzAR,
    make_regression,
    make_svm_mixture,
    make_svm_probit,
    shard_split,
)
from ..tuning import (
    BIC,
    Fixed,
    ScheduleContext,
    TheoryOptionI,
    TheoryOptionII,
    bic_select,
    classification_metrics,
    default_grid,
    estimation_metrics,
    prediction_mse,
)
from .config import config_dict, with_value

log = logging.getLogger(__name__)

LABELS = {"trimean": "Trimean", "median": "Median", "mean": "Mean", "global": "Global", "local": "Local"}
METRICS = ("l2_error", "l1_error", "fp", "fn", "f1", "accuracy", "mse")


def make_model(cfg, n):
    if cfg.task in ("pseudo_huber", "real_regression"):
        return PseudoHuber(cfg.a)
    if cfg.task == "quantile":
        return SmoothedQuantile(cfg.tau, cfg.h if cfg.h is not None else default_bandwidth(n, cfg.d))
    return Hinge()


def make_noise(cfg):
    return {
        "gaussian": Gaussian(cfg.sigma),
        "t3": StudentT(3.0),
        "t2.1": StudentT(2.1),
        "cauchy": Cauchy(),
    }[cfg.noise]


def noise_quantile(noise, tau):
    if isinstance(noise, Gaussian):
        return noise.sigma * stats.norm.ppf(tau)
    if isinstance(noise, StudentT):
        return stats.t.ppf(tau, noise.nu)
    return math.tan(math.pi * (tau - 0.5))


class Problem:
    """Data for one replicate: shards, pooled data, truth and test set."""

    def __init__(self, shards, full, truth=None, test=None):
        self.shards = shards
        self.full = full
        self.truth = truth
        self.test = test


def _truncate(X, y, m):
    N = (X.shape[0] // m) * m
    if N == 0:
        raise ValueError(f"fewer rows than workers ({X.shape[0]} < {m})")
    return X[:N], y[:N]


def build_problem(cfg, seed_r, loaded=None):
    data_rng = R.stream(seed_r, R.DATA)
    split_rng = R.stream(seed_r, R.SHARDING)
    cov = ToeplitzAR(cfg.rho)
    N, d = cfg.N, cfg.d
    test = None
    if cfg.task in ("pseudo_huber", "quantile"):
        noise = make_noise(cfg)
        X, y, truth = make_regression(N, d, cov, noise, data_rng)
        if cfg.task == "quantile":
            # centre the noise so x^T theta* is the conditional tau-quantile
            y = y - noise_quantile(noise, cfg.tau)
        theta_star = truth.theta_star
    elif cfg.task == "svm_probit":
        X, y, truth = make_svm_probit(N, d, cov, data_rng, s=cfg.s)
        Xt, yt, _ = make_svm_probit(N, d, cov, R.stream(seed_r, R.TEST_DATA), theta_star=truth.theta_star)
        test = DataShard(Xt, yt)
        theta_star = truth.theta_star
    elif cfg.task == "svm_mixture":
        X, y, truth = make_svm_mixture(N, d, data_rng)
        Xt, yt, _ = make_svm_mixture(N, d, R.stream(seed_r, R.TEST_DATA))
        test = DataShard(Xt, yt)
        theta_star = truth.theta_star
    else:
        train, held = loaded
        if held is None:
            perm = split_rng.permutation(train.N)
            n_test = int(round(cfg.test_fraction * train.N))
            held = TabularDataset(train.X[perm[:n_test]], train.y[perm[:n_test]])
            train = TabularDataset(train.X[perm[n_test:]], train.y[perm[n_test:]])
        train_s, (test_s,), _ = standardize_fit_apply(train, [held])
        X, y, Xt, yt = train_s.X, train_s.y, test_s.X, test_s.y
        if cfg.task == "real_regression":
            centre = float(np.mean(y))
            y, yt = y - centre, yt - centre
        X, y = _truncate(X, y, cfg.m)
        test = DataShard(Xt, yt)
        theta_star = None
    shards = shard_split(X, y, cfg.m, split_rng)
    return Problem(shards, DataShard(X, y), theta_star, test)


def evaluate(cfg, prob, theta):
    theta = np.asarray(theta)
    out = dict.fromkeys(METRICS)
    if prob.truth is not None:
        rep = estimation_metrics(theta, prob.truth)
        out.update(l2_error=rep.l2_error, l1_error=rep.l1_error, fp=rep.fp, fn=rep.fn, f1=rep.f1, mse=rep.mse)
    if cfg.task in ("svm_probit", "svm_mixture", "real_svm"):
        out["accuracy"] = classification_metrics(theta, prob.test)
    if cfg.task == "real_regression":
        out["mse"] = prediction_mse(theta, prob.test)
    return out


def _bic_lambda(model, shard, cfg):
    if cfg.lambda_mode == "fixed":
        return cfg.lambda_value
    g0 = float(np.max(np.abs(empirical_gradient(model, np.zeros(shard.d), shard))))
    return bic_select(model, shard, None, default_grid(g0, cfg.grid_size, cfg.grid_ratio))


def schedule_for(cfg, agg, model, shard1):
    if cfg.lambda_mode == "fixed":
        return Fixed(cfg.lambda_value)
    if cfg.lambda_mode == "bic":
        g0 = float(np.max(np.abs(empirical_gradient(model, np.zeros(shard1.d), shard1))))
        return BIC(default_grid(g0, cfg.grid_size, cfg.grid_ratio))
    if cfg.lambda_mode == "theory_constant":
        return TheoryOptionI(cfg.c1, cfg.c2)
    return TheoryOptionII(cfg.c1, cfg.c2, cfg.c3)


def make_rule(cfg, agg):
    if agg == "trimean":
        return TrimmedMean(cfg.trim_level)
    if agg == "median":
        return Median()
    return Mean()


def _row(cfg, rep, rnd, est, metrics, time_ms, floats, blowup=False):
    row = {"rep": rep, "round": rnd, "estimator": LABELS[est], "attack": cfg.attack,
           "alpha": cfg.alpha, "time_ms": time_ms, "floats_sent": floats, "blowup": blowup}
    if blowup:
        row.update({k: float("nan") for k in METRICS})
    else:
        row.update(metrics)
    return row


def _finite_metrics(metrics):
    return all(v is None or math.isfinite(v) for v in metrics.values())


def run_replicate(cfg, rep, loaded=None):
    """All estimator rows for replicate ``rep``."""
    seed_r = R.derive_seed(cfg.seed, rep)
    prob = build_problem(cfg, seed_r, loaded)
    shard1 = prob.shards[0]
    n = shard1.n
    model = make_model(cfg, n)
    rows = []

    t0 = time.perf_counter()
    lam0 = _bic_lambda(model, shard1, cfg)
    theta0 = initial_estimate(model, shard1, lam0)
    local_ms = 1e3 * (time.perf_counter() - t0)
    if "local" in cfg.estimators:
        rows.append(_row(cfg, rep, 0, "local", evaluate(cfg, prob, theta0), local_ms, 0))

    if "global" in cfg.estimators:
        t0 = time.perf_counter()
        try:
            lamg = _bic_lambda(model, prob.full, cfg)
            thg = solve_surrogate(SurrogateProblem(model, prob.full, np.zeros(cfg.d), lamg)).theta
            met = evaluate(cfg, prob, thg)
            rows.append(_row(cfg, rep, 0, "global", met, 1e3 * (time.perf_counter() - t0), 0,
                             not _finite_metrics(met)))
        except SolverDivergence:
            rows.append(_row(cfg, rep, 0, "global", None, 1e3 * (time.perf_counter() - t0), 0, True))

    N = sum(s.n for s in prob.shards)
    ctx = ScheduleContext(n=n, N=N, d=cfg.d, beta=cfg.trim_level, alpha=cfg.alpha, s_estimate=cfg.s)
    attack = parse_attack(cfg.attack, cfg.variance)
    alpha = cfg.alpha if cfg.attack != "none" else 0.0
    floats = cfg.m * cfg.d + (cfg.m - 1) * cfg.d
    for agg in cfg.agg:
        rule = make_rule(cfg, agg)
        ctx_agg = ctx if agg != "mean" else ScheduleContext(n, N, cfg.d, 0.0, cfg.alpha, cfg.s)
        spec = ClusterSpec(model, cfg.m, alpha, rule, attack, rounds=cfg.rounds, seed=seed_r,
                           projection=cfg.projection, projection_budget=cfg.s, parallel=cfg.parallel)
        sched = schedule_for(cfg, agg, model, shard1)
        try:
            traces = run_algorithm(spec, prob.shards, sched, theta0, ctx_agg,
                                   evaluate=lambda th: evaluate(cfg, prob, th))
        except SolverDivergence as exc:
            log.info("rep %d %s diverged: %s", rep, agg, exc)
            rows.extend(_row(cfg, rep, t, agg, None, 0.0, floats, True) for t in range(1, cfg.rounds + 1))
            continue
        elapsed = 0.0
        blown = False
        for tr in traces:
            elapsed += tr.wall_time
            # a surrogate solve that cannot reach its KKT tolerance is escaping
            # along a direction where the shifted objective is unbounded
            blown = blown or not tr.converged or not _finite_metrics(tr.metrics)
            rows.append(_row(cfg, rep, tr.t, agg, tr.metrics, 1e3 * elapsed,
                             tr.floats_uplinked + tr.floats_broadcast, blown))
    return rows


def load_real(cfg):
    if cfg.task == "real_regression":
        with open(cfg.data, encoding="utf-8") as fh:
            train = parse_numeric_csv(fh, cfg.target, has_header=True, log1p_target=cfg.log1p_target)
        test = None
        if cfg.test_data:
            with open(cfg.test_data, encoding="utf-8") as fh:
                test = parse_numeric_csv(fh, cfg.target, has_header=True, log1p_target=cfg.log1p_target)
        return train, test
    with open(cfg.data, encoding="utf-8") as fh:
        train = parse_libsvm(fh)
    test = None
    if cfg.test_data:
        with open(cfg.test_data, encoding="utf-8") as fh:
            test = parse_libsvm(fh, d_hint=train.d)
        if test.d > train.d:
            train = TabularDataset(np.pad(train.X, ((0, 0), (0, test.d - train.d))), train.y)
    return train, test


def _rep_worker(args):
    cfg, rep, loaded = args
    return run_replicate(cfg, rep, loaded)


def _apply_real_shape(cfg, loaded):
    # n and d follow the data for real tasks
    from dataclasses import replace

    train, test = loaded
    n_train = train.N if test is not None else train.N - int(round(cfg.test_fraction * train.N))
    return replace(cfg, n=max(1, n_train // cfg.m), d=train.d)


def run_rows(cfg):
    cfg.validate()
    loaded = None
    if cfg.task.startswith("real_"):
        loaded = load_real(cfg)
        cfg = _apply_real_shape(cfg, loaded)
    jobs = [(cfg, r, loaded) for r in range(cfg.reps)]
    if cfg.jobs > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_rep = list(pool.map(_rep_worker, jobs))
    else:
        per_rep = [_rep_worker(j) for j in jobs]
    return cfg, [row for rows in per_rep for row in rows]


def summarize(cfg, rows):
    """Mean/std of each metric at each estimator's final round, blowups excluded."""
    out = {"config": config_dict(cfg), "estimators": {}}
    final = {}
    for row in rows:
        key = row["estimator"]
        final[key] = max(final.get(key, 0), row["round"])
    for est, rnd in final.items():
        sel = [r for r in rows if r["estimator"] == est and r["round"] == rnd]
        ok = [r for r in sel if not r["blowup"]]
        entry = {"round": rnd, "reps": len(sel), "blowup_rate": (len(sel) - len(ok)) / len(sel) if sel else 0.0}
        for k in METRICS + ("time_ms",):
            vals = [r[k] for r in ok if r.get(k) is not None]
            if vals:
                entry[k] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
        out["estimators"][est] = entry
    return out


def summary_path(csv_path):
    base = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return base + ".summary.json"


def run_experiment(cfg, out=None):
    """Run every replicate, write the CSV (and JSON summary) if ``out`` is set."""
    out = out or cfg.out
    cfg, rows = run_rows(cfg)
    summary = summarize(cfg, rows)
    if out:
        write_results_csv(rows, out)
        write_summary_json(summary, summary_path(out))
    return rows, summary


def sweep(cfg, axis, values, out=None):
    """Run the template once per value of ``axis``; rows gain an ``axis`` column."""
    if axis not in ("alpha", "n", "m", "tau"):
        raise ValueError(f"cannot sweep {axis!r}")
    out = out or cfg.out
    all_rows = []
    summaries = {}
    for v in values:
        cell = with_value(cfg, axis, v)
        cell_cfg, rows = run_rows(cell)
        for r in rows:
            r[axis] = getattr(cell_cfg, axis)
        all_rows.extend(rows)
        summaries[str(getattr(cell_cfg, axis))] = summarize(cell_cfg, rows)
    if out:
        write_results_csv(all_rows, out, columns=(axis,) + CSV_COLUMNS)
        write_summary_json({"axis": axis, "cells": summaries}, summary_path(out))
    return all_rows, summaries
