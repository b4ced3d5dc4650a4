"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``GAUSSAREA_PURE=1`` to force the numpy implementation.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("GAUSSAREA_PURE", "") != "1":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py


def theta_integral(k1, k2, n=512, mode="split", impl=None):
    """Angular integral of ``|cos t - k1 sin t| |cos t - k2 sin t|`` over a full turn.

    ``mode="trapezoid"`` uses ``n`` uniform nodes.  ``mode="split"`` places
    ``n // 4`` Gauss-Legendre nodes on each of the four arcs between the
    kinks, which is exact to roundoff for ``n >= 64``.
    """
    impl = impl or _impl
    k1 = np.asarray(k1, dtype=np.float64).ravel()
    k2 = np.asarray(k2, dtype=np.float64).ravel()
    if mode == "trapezoid":
        return impl.theta_integral_trapezoid(k1, k2, int(n))
    if mode == "split":
        x, w = np.polynomial.legendre.leggauss(max(2, int(n) // 4))
        return impl.theta_integral_split(k1, k2, x, w)
    raise ValueError(f"unknown theta quadrature mode {mode!r}")
