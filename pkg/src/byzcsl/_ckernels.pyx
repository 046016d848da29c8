# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``.

Operation order matches the NumPy reference so results are bit-identical.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport hypot, isnan, INFINITY, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef struct keyed:
    double key
    Py_ssize_t idx


cdef inline void _insertion(keyed* buf, Py_ssize_t m) noexcept nogil:
    # stable; fast for the small worker counts typical here
    cdef Py_ssize_t i, k
    cdef keyed cur
    for i in range(1, m):
        cur = buf[i]
        k = i - 1
        while k >= 0 and buf[k].key > cur.key:
            buf[k + 1] = buf[k]
            k -= 1
        buf[k + 1] = cur


cdef void _merge_sort(keyed* buf, keyed* tmp, Py_ssize_t m) noexcept nogil:
    # stable bottom-up merge over insertion-sorted runs of 32
    cdef Py_ssize_t run = 32, lo, mid, hi, i, k, p, q
    cdef keyed* src = buf
    cdef keyed* dst = tmp
    cdef keyed* sw
    lo = 0
    while lo < m:
        _insertion(buf + lo, min(run, m - lo))
        lo += run
    while run < m:
        lo = 0
        while lo < m:
            mid = min(lo + run, m)
            hi = min(lo + 2 * run, m)
            p = lo
            q = mid
            k = lo
            while p < mid and q < hi:
                if src[q].key < src[p].key:
                    dst[k] = src[q]
                    q += 1
                else:
                    dst[k] = src[p]
                    p += 1
                k += 1
            while p < mid:
                dst[k] = src[p]
                p += 1
                k += 1
            while q < hi:
                dst[k] = src[q]
                q += 1
                k += 1
            lo = hi
        sw = src
        src = dst
        dst = sw
        run *= 2
    if src != buf:
        for i in range(m):
            buf[i] = src[i]


cdef inline void _sort_row(const double* col, Py_ssize_t m, keyed* buf) noexcept nogil:
    # sorts one coordinate's m messages; ``col`` is contiguous
    cdef Py_ssize_t k
    cdef double v
    for k in range(m):
        v = col[k]
        buf[k].key = INFINITY if isnan(v) else v
        buf[k].idx = k
    if m <= 64:
        _insertion(buf, m)
    else:
        # scratch half sits right after the sort buffer
        _merge_sort(buf, buf + m, m)


cdef inline const double[:, ::1] _columns(G):
    # (d, m) layout so each coordinate's messages sit together in memory
    return np.ascontiguousarray(np.asarray(G, dtype=np.float64).T)


def stable_order(G):
    cdef const double[:, ::1] g = _columns(G)
    cdef Py_ssize_t d = g.shape[0], m = g.shape[1], j, r
    out = np.empty((m, d), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] o = out
    cdef keyed* buf = <keyed*> malloc(2 * max(m, 1) * sizeof(keyed))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(d):
                _sort_row(&g[j, 0], m, buf)
                for r in range(m):
                    o[r, j] = buf[r].idx
    finally:
        free(buf)
    return out


def trimmed_mean(G, Py_ssize_t b):
    cdef const double[:, ::1] g = _columns(G)
    cdef Py_ssize_t d = g.shape[0], m = g.shape[1], j, r
    out = np.empty(d)
    cdef double[::1] o = out
    cdef double acc
    cdef keyed* buf = <keyed*> malloc(2 * max(m, 1) * sizeof(keyed))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(d):
                _sort_row(&g[j, 0], m, buf)
                acc = 0.0
                for r in range(b, m - b):
                    acc += g[j, buf[r].idx]
                o[j] = acc / (m - 2 * b)
    finally:
        free(buf)
    return out


def column_mean(G):
    return trimmed_mean(G, 0)


def order_statistic(G, Py_ssize_t kth):
    cdef const double[:, ::1] g = _columns(G)
    cdef Py_ssize_t d = g.shape[0], m = g.shape[1], j
    out = np.empty(d)
    cdef double[::1] o = out
    cdef keyed* buf = <keyed*> malloc(2 * max(m, 1) * sizeof(keyed))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(d):
                _sort_row(&g[j, 0], m, buf)
                o[j] = g[j, buf[kth - 1].idx]
    finally:
        free(buf)
    return out


def pseudo_huber_value(double a, r):
    cdef const double[::1] x = np.ascontiguousarray(r, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double s, ax
    with nogil:
        for i in range(n):
            s = hypot(1.0, a * x[i])
            ax = fabs(x[i])
            o[i] = (2.0 * ax / (s + 1.0)) * ax
    return out.reshape(np.shape(r))


def pseudo_huber_deriv(double a, r):
    cdef const double[::1] x = np.ascontiguousarray(r, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = 2.0 * x[i] / hypot(1.0, a * x[i])
    return out.reshape(np.shape(r))


def smoothed_quantile_value(double tau, double h, u):
    cdef const double[::1] x = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double w = 0.5 * h, v
    with nogil:
        for i in range(n):
            v = x[i]
            if v <= -w:
                o[i] = v * (tau - 1.0)
            elif v >= w:
                o[i] = v * tau
            else:
                o[i] = v * v / (2.0 * h) + v * (tau - 0.5) + h / 8.0
    return out.reshape(np.shape(u))


def smoothed_quantile_deriv(double tau, double h, u):
    cdef const double[::1] x = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double w = 0.5 * h, v
    with nogil:
        for i in range(n):
            v = x[i]
            if v <= -w:
                o[i] = tau - 1.0
            elif v >= w:
                o[i] = tau
            else:
                o[i] = v / h + (tau - 0.5)
    return out.reshape(np.shape(u))
