"""Second-order two-variable jets.

A :class:`Jet` carries a value together with its first and second partial
derivatives with respect to two chart parameters ``u`` and ``v``.  Chart
maps written with jets get exact derivatives without finite differences,
which matters for the glued surfaces whose features live at scale 1e-5.

All components are numpy arrays that broadcast against each other.  Vector
valued jets keep the vector index on the last axis.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_FIELDS = ("val", "du", "dv", "duu", "duv", "dvv")
_first_only = False


@contextmanager
def first_order():
    """Skip second derivatives inside the block (they come out as zeros)."""
    global _first_only
    prev, _first_only = _first_only, True
    try:
        yield
    finally:
        _first_only = prev


def _is_zero(c):
    return c.ndim == 0 and c == 0.0


class Jet:
    __slots__ = _FIELDS
    __array_ufunc__ = None

    def __init__(self, val, du=0.0, dv=0.0, duu=0.0, duv=0.0, dvv=0.0):
        self.val = np.asarray(val, dtype=float)
        self.du = np.asarray(du, dtype=float)
        self.dv = np.asarray(dv, dtype=float)
        self.duu = np.asarray(duu, dtype=float)
        self.duv = np.asarray(duv, dtype=float)
        self.dvv = np.asarray(dvv, dtype=float)

    # -- construction -----------------------------------------------------
    @classmethod
    def seeds(cls, u, v):
        """Independent variables ``u`` and ``v`` as jets."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        one_u = np.ones_like(u)
        one_v = np.ones_like(v)
        return cls(u, one_u, 0.0 * u), cls(v, 0.0 * v, one_v)

    @classmethod
    def const(cls, c):
        return cls(c)

    def components(self):
        return tuple(getattr(self, f) for f in _FIELDS)

    def _map(self, fn):
        return Jet(*(fn(c) for c in self.components()))

    # -- shape helpers ----------------------------------------------------
    @property
    def shape(self):
        return np.broadcast_shapes(*(c.shape for c in self.components()))

    def full(self):
        """Broadcast every component to the common shape (read-only views)."""
        shp = self.shape
        return Jet(*(c if c.shape == shp else np.broadcast_to(c, shp) for c in self.components()))

    def _map_full(self, fn):
        # zero components stay scalar zeros instead of being broadcast
        shp = self.shape
        return Jet(*(c if _is_zero(c) else fn(c if c.shape == shp else np.broadcast_to(c, shp))
                     for c in self.components()))

    def __getitem__(self, idx):
        return self._map_full(lambda c: c[idx])

    def sum(self, axis=-1):
        return self._map_full(lambda c: c.sum(axis=axis))

    def matmul(self, mat):
        """Apply ``mat`` (shape (m, n)) to the trailing vector axis."""
        mat = np.asarray(mat, dtype=float)
        return self._map_full(lambda c: c @ mat.T)

    # -- arithmetic -------------------------------------------------------
    def __neg__(self):
        return self._map(np.negative)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(*(a + b for a, b in zip(self.components(), other.components())))
        return Jet(self.val + other, self.du, self.dv, self.duu, self.duv, self.dvv)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return self._map(lambda c: c * other)
        a, b = self, other
        if _first_only:
            return Jet(a.val * b.val, a.du * b.val + a.val * b.du, a.dv * b.val + a.val * b.dv)
        return Jet(
            a.val * b.val,
            a.du * b.val + a.val * b.du,
            a.dv * b.val + a.val * b.dv,
            a.duu * b.val + 2.0 * a.du * b.du + a.val * b.duu,
            a.duv * b.val + a.du * b.dv + a.dv * b.du + a.val * b.duv,
            a.dvv * b.val + 2.0 * a.dv * b.dv + a.val * b.dvv,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n):
        if n == 2:
            return self * self
        x = self.val
        return _chain(self, x**n, n * x ** (n - 1), n * (n - 1) * x ** (n - 2))

    def __repr__(self):
        return f"Jet(val={self.val!r})"


def _chain(a, f0, f1, f2):
    if _first_only:
        return Jet(f0, f1 * a.du, f1 * a.dv)
    return Jet(
        f0,
        f1 * a.du,
        f1 * a.dv,
        f2 * a.du * a.du + f1 * a.duu,
        f2 * a.du * a.dv + f1 * a.duv,
        f2 * a.dv * a.dv + f1 * a.dvv,
    )


def as_jet(x):
    return x if isinstance(x, Jet) else Jet(x)


def reciprocal(a):
    x = a.val
    return _chain(a, 1.0 / x, -1.0 / x**2, 2.0 / x**3)


def sqrt(a):
    s = np.sqrt(a.val)
    return _chain(a, s, 0.5 / s, -0.25 / (s * a.val))


def sin(a):
    s, c = np.sin(a.val), np.cos(a.val)
    return _chain(a, s, c, -s)


def cos(a):
    s, c = np.sin(a.val), np.cos(a.val)
    return _chain(a, c, -s, -c)


def poly(a, coeffs):
    """Evaluate ``sum(coeffs[k] * a**k)`` with exact derivatives."""
    x = a.val
    f0 = np.zeros_like(x)
    f1 = np.zeros_like(x)
    f2 = np.zeros_like(x)
    for k, ck in enumerate(coeffs):
        if ck == 0.0:
            continue
        f0 = f0 + ck * x**k
        if k >= 1:
            f1 = f1 + ck * k * x ** (k - 1)
        if k >= 2:
            f2 = f2 + ck * k * (k - 1) * x ** (k - 2)
    return _chain(a, f0, f1, f2)


def where(cond, a, b):
    a, b = as_jet(a), as_jet(b)
    return Jet(*(np.where(cond, ca, cb) for ca, cb in zip(a.components(), b.components())))


def stack(items, axis=-1):
    items = [as_jet(i) for i in items]
    shp = np.broadcast_shapes(*(c.shape for i in items for c in i.components()))

    def fit(c):
        return c if c.shape == shp else np.broadcast_to(c, shp)

    def comp(f):
        cs = [getattr(i, f) for i in items]
        if all(_is_zero(c) for c in cs):
            return 0.0
        return np.stack([fit(c) for c in cs], axis=axis)

    return Jet(*(comp(f) for f in _FIELDS))


def outer(a, vec):
    """Scalar jet ``a`` times the constant vector ``vec`` (vector on the last axis)."""
    vec = np.asarray(vec, dtype=float)
    return Jet(*(np.asarray(c)[..., None] * vec for c in a.components()))


def dot(a, b):
    return (a * b).sum(axis=-1)
