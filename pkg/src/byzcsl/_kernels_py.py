"""Pure NumPy implementations of the hot kernels.

These are the reference versions; the compiled module ``_ckernels`` mirrors
every function here with the same floating-point operation order, so both
backends return bit-identical arrays.
"""
import numpy as np


def _sort_keys(G):
    # NaN ranks as +inf; ties keep worker order (stable sort)
    return np.where(np.isnan(G), np.inf, G)


def stable_order(G):
    """Per-column worker indices sorted by value, ties broken by index."""
    return np.argsort(_sort_keys(G), axis=0, kind="stable")


def trimmed_mean(G, b):
    """Coordinate-wise mean of the values ranked b+1..m-b.

    Survivors are summed in ascending rank order, so the result depends only
    on the multiset of values in each column.
    """
    m, d = G.shape
    S = np.take_along_axis(G, stable_order(G), axis=0)
    acc = np.zeros(d)
    for r in range(b, m - b):
        acc += S[r]
    return acc / (m - 2 * b)


def column_mean(G):
    """Plain mean, summed in rank order like :func:`trimmed_mean`."""
    return trimmed_mean(G, 0)


def order_statistic(G, k):
    """k-th smallest value (1-based) in every column."""
    order = stable_order(G)
    return np.take_along_axis(G, order[k - 1][None, :], axis=0)[0]


def pseudo_huber_value(a, r):
    s = np.hypot(1.0, a * r)
    return (2.0 * np.abs(r) / (s + 1.0)) * np.abs(r)


def pseudo_huber_deriv(a, r):
    return 2.0 * r / np.hypot(1.0, a * r)


def smoothed_quantile_value(tau, h, u):
    w = 0.5 * h
    mid = u * u / (2.0 * h) + u * (tau - 0.5) + h / 8.0
    return np.where(u <= -w, u * (tau - 1.0), np.where(u >= w, u * tau, mid))


def smoothed_quantile_deriv(tau, h, u):
    w = 0.5 * h
    mid = u / h + (tau - 0.5)
    return np.where(u <= -w, tau - 1.0, np.where(u >= w, tau, mid))
