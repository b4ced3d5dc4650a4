# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled angular quadrature kernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, fabs, M_PI

cnp.import_array()


def theta_integral_trapezoid(k1, k2, Py_ssize_t n):
    cdef const double[::1] a = np.ascontiguousarray(k1, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(k2, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0], i, j
    cdef double[::1] c = np.cos(np.arange(n) * (2.0 * M_PI / n))
    cdef double[::1] s = np.sin(np.arange(n) * (2.0 * M_PI / n))
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, h = 2.0 * M_PI / n
    with nogil:
        for i in range(m):
            acc = 0.0
            for j in range(n):
                acc = acc + fabs(c[j] - a[i] * s[j]) * fabs(c[j] - b[i] * s[j])
            o[i] = acc * h
    return out


def theta_integral_split(k1, k2, x, w):
    cdef const double[::1] a = np.ascontiguousarray(k1, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(k2, dtype=np.float64)
    cdef const double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] ws = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0], q = xs.shape[0], i, j, arc
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double t1, t2, lo, hi, half, t, ct, st, acc, total
    with nogil:
        for i in range(m):
            t1 = atan2(1.0, a[i])
            t2 = atan2(1.0, b[i])
            if t1 > t2:
                t1, t2 = t2, t1
            total = 0.0
            for arc in range(2):
                if arc == 0:
                    lo = t1
                    hi = t2
                else:
                    lo = t2
                    hi = t1 + M_PI
                half = 0.5 * (hi - lo)
                acc = 0.0
                for j in range(q):
                    t = lo + half * (xs[j] + 1.0)
                    ct = cos(t)
                    st = sin(t)
                    acc = acc + ws[j] * fabs(ct - a[i] * st) * fabs(ct - b[i] * st)
                total = total + half * acc
            o[i] = 2.0 * total
    return out
