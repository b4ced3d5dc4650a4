"""Numpy implementation of the angular quadrature kernels."""
import numpy as np


def theta_integral_trapezoid(k1, k2, n):
    """``int_0^{2 pi} |cos t - k1 sin t| |cos t - k2 sin t| dt`` on ``n`` uniform nodes."""
    k1 = np.ascontiguousarray(k1, dtype=np.float64)
    k2 = np.ascontiguousarray(k2, dtype=np.float64)
    t = np.arange(n) * (2.0 * np.pi / n)
    c, s = np.cos(t), np.sin(t)
    out = np.empty_like(k1)
    # chunk to bound memory on large clouds
    step = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, k1.size, step):
        a = k1[lo:lo + step, None]
        b = k2[lo:lo + step, None]
        vals = np.abs(c - a * s) * np.abs(c - b * s)
        out[lo:lo + step] = vals.sum(axis=1) * (2.0 * np.pi / n)
    return out


def theta_integral_split(k1, k2, x, w):
    """Same integral with Gauss-Legendre rule ``(x, w)`` on each arc between kinks.

    The integrand has period pi, so two arcs of one period are integrated and
    the sum is doubled.
    """
    k1 = np.ascontiguousarray(k1, dtype=np.float64)
    k2 = np.ascontiguousarray(k2, dtype=np.float64)
    t1 = np.arctan2(1.0, k1)
    t2 = np.arctan2(1.0, k2)
    a = np.minimum(t1, t2)[:, None]
    b = np.maximum(t1, t2)[:, None]
    out = np.zeros(k1.shape)
    for lo, hi in ((a, b), (b, a + np.pi)):
        half = 0.5 * (hi - lo)
        t = lo + half * (x[None, :] + 1.0)
        c, s = np.cos(t), np.sin(t)
        vals = np.abs(c - k1[:, None] * s) * np.abs(c - k2[:, None] * s)
        out += half[:, 0] * (vals @ w)
    return 2.0 * out
