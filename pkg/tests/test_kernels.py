import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from byzcsl import _kernels_py, kernels

from conftest import _ckernels

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled backend not built")


def test_backend_is_reported():
    assert kernels.BACKEND in ("python", "cython")


def test_env_var_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "from byzcsl import kernels; print(kernels.BACKEND)"],
        env={**os.environ, "BYZCSL_PURE_PYTHON": "1"},
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_stable_order_breaks_ties_by_index(backend):
    G = np.array([[1.0], [0.0], [1.0], [0.0]])
    assert backend.stable_order(G)[:, 0].tolist() == [1, 3, 0, 2]


def test_nan_ranks_last(backend):
    G = np.array([[np.nan, 1.0], [2.0, np.nan], [0.0, 0.0]])
    assert backend.stable_order(G).tolist() == [[2, 2], [1, 0], [0, 1]]
    # with one trimmed per tail of three, the survivor is the middle value
    np.testing.assert_array_equal(backend.trimmed_mean(G, 1), [2.0, 1.0])


def test_order_statistic_small(backend):
    G = np.array([[10.0], [40.0], [20.0], [30.0]])
    assert backend.order_statistic(G, 1)[0] == 10.0
    assert backend.order_statistic(G, 2)[0] == 20.0
    assert backend.order_statistic(G, 4)[0] == 40.0


def test_column_mean_sums_in_rank_order(backend, rng):
    G = rng.standard_normal((13, 7))
    ref = [sum(sorted(col)) / 13 for col in G.T]
    np.testing.assert_array_equal(backend.column_mean(G), ref)


@needs_c
@pytest.mark.parametrize("m", [1, 2, 3, 20, 33, 64, 65, 129, 300])
def test_backends_bit_identical(m, rng):
    for _ in range(5):
        G = rng.integers(-3, 4, size=(m, 17)).astype(float)
        G[rng.random(G.shape) < 0.1] = np.nan
        np.testing.assert_array_equal(_kernels_py.stable_order(G), _ckernels.stable_order(G))
        b = int(0.3 * m) if m > 2 else 0
        np.testing.assert_array_equal(_kernels_py.trimmed_mean(G, b), _ckernels.trimmed_mean(G, b))
        k = (m + 1) // 2
        np.testing.assert_array_equal(_kernels_py.order_statistic(G, k), _ckernels.order_statistic(G, k))
        np.testing.assert_array_equal(_kernels_py.column_mean(G), _ckernels.column_mean(G))


finite = st.floats(-1e6, 1e6, allow_nan=False)


@needs_c
@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 60), elements=finite),
       st.floats(0.05, 3.0), st.floats(0.01, 0.99), st.floats(1e-3, 5.0))
def test_elementwise_kernels_agree(x, a, tau, h):
    for name, args in [
        ("pseudo_huber_value", (a, x)),
        ("pseudo_huber_deriv", (a, x)),
        ("smoothed_quantile_value", (tau, h, x)),
        ("smoothed_quantile_deriv", (tau, h, x)),
    ]:
        np.testing.assert_array_equal(getattr(_kernels_py, name)(*args), getattr(_ckernels, name)(*args))


@needs_c
@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.data())
def test_trimmed_mean_backends_agree(m, d, data):
    G = data.draw(arrays(np.float64, (m, d), elements=finite))
    b = data.draw(st.integers(0, (m - 1) // 2))
    np.testing.assert_array_equal(_kernels_py.trimmed_mean(G, b), _ckernels.trimmed_mean(G, b))
