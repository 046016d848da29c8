"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
NumPy reference in ``_kernels_py`` is used. Set ``BYZCSL_PURE_PYTHON=1`` to
force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("BYZCSL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

stable_order = _impl.stable_order
trimmed_mean = _impl.trimmed_mean
column_mean = _impl.column_mean
order_statistic = _impl.order_statistic
pseudo_huber_value = _impl.pseudo_huber_value
pseudo_huber_deriv = _impl.pseudo_huber_deriv
smoothed_quantile_value = _impl.smoothed_quantile_value
smoothed_quantile_deriv = _impl.smoothed_quantile_deriv
