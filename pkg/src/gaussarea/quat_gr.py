"""Quaternions and the oriented Grassmannian of 2-planes in R^4.

Points of R^4 are identified with quaternions ``w + x i + y j + z k`` and
stored as float arrays with a trailing axis of length 4.  Two-vectors are
stored with a trailing axis of length 6 in the basis

    1^i, 1^j, 1^k, j^k, k^i, i^j

so that the Hodge star simply swaps the two halves.  Every function here is
vectorized over leading axes and free of side effects.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BaseMismatch, NonSimple, NotTangent, NotUnit

SQRT2 = np.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2

ONE = np.array([1.0, 0.0, 0.0, 0.0])
QI = np.array([0.0, 1.0, 0.0, 0.0])
QJ = np.array([0.0, 0.0, 1.0, 0.0])
QK = np.array([0.0, 0.0, 0.0, 1.0])

# index pairs (p, q) of the basis 2-vectors e_p ^ e_q
WEDGE_PAIRS = ((0, 1), (0, 2), (0, 3), (2, 3), (3, 1), (1, 2))

SIMPLE_TOL = 1e-9


# --------------------------------------------------------------------------
# quaternion algebra
# --------------------------------------------------------------------------
def quat_mul(a, b):
    """Hamilton product of quaternion arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def quat_conj(a):
    a = np.asarray(a, dtype=float)
    return a * np.array([1.0, -1.0, -1.0, -1.0])


def quat_norm(a):
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def imag(q):
    """Imaginary part of a quaternion as a 3-vector."""
    return np.asarray(q)[..., 1:]


def pure(x):
    """Embed 3-vectors as purely imaginary quaternions."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1)


# --------------------------------------------------------------------------
# two-vectors
# --------------------------------------------------------------------------
def wedge(a, b):
    """Exterior product ``a ^ b`` in the fixed six-term basis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.stack([a[..., p] * b[..., q] - a[..., q] * b[..., p] for p, q in WEDGE_PAIRS], axis=-1)


def hodge_star(xi):
    xi = np.asarray(xi, dtype=float)
    return np.concatenate([xi[..., 3:], xi[..., :3]], axis=-1)


def wedge_square(xi):
    """Coefficient of ``xi ^ xi`` on the volume form 1^i^j^k."""
    xi = np.asarray(xi, dtype=float)
    return 2.0 * np.sum(xi[..., :3] * xi[..., 3:], axis=-1)


def twovector_matrix(xi):
    """Antisymmetric 4x4 matrix ``sum x y^T - y x^T`` representing ``xi``."""
    xi = np.asarray(xi, dtype=float)
    m = np.zeros(xi.shape[:-1] + (4, 4))
    for c, (p, q) in enumerate(WEDGE_PAIRS):
        m[..., p, q] += xi[..., c]
        m[..., q, p] -= xi[..., c]
    return m


@dataclass(frozen=True)
class GrassPoint:
    """Image of an oriented plane in S^2(1/sqrt2) x S^2(1/sqrt2)."""

    plus: np.ndarray
    minus: np.ndarray

    def as_array(self):
        return np.concatenate([self.plus, self.minus], axis=-1)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[..., :3], arr[..., 3:])

    def to_json(self):
        return json.dumps(self.as_array().ravel().tolist())

    @classmethod
    def from_json(cls, text):
        return cls.from_array(np.array(json.loads(text), dtype=np.float64))


def iso_I_linear(xi):
    """The linear isometry onto Lambda^2_+ x Lambda^2_- in e^{+-} coordinates."""
    xi = np.asarray(xi, dtype=float)
    lo, hi = xi[..., :3], xi[..., 3:]
    return GrassPoint((lo + hi) * INV_SQRT2, (lo - hi) * INV_SQRT2)


def iso_I(xi, tol=SIMPLE_TOL):
    """Grassmannian point of a simple 2-vector via the +-projections."""
    xi = np.asarray(xi, dtype=float)
    defect = np.abs(wedge_square(xi))
    if np.any(defect > tol):
        raise NonSimple(f"|xi ^ xi| = {np.max(defect):.3e} exceeds {tol:.1e}")
    return iso_I_linear(xi)


def iso_I_inverse(gp):
    plus = np.asarray(gp.plus, dtype=float)
    minus = np.asarray(gp.minus, dtype=float)
    return np.concatenate([(plus + minus) * INV_SQRT2, (plus - minus) * INV_SQRT2], axis=-1)


def iso_I_quat(a, b):
    """Quaternionic form ``(b conj(a), conj(a) b) / sqrt2`` of ``I(a ^ b)``."""
    ac = quat_conj(a)
    return GrassPoint(imag(quat_mul(b, ac)) * INV_SQRT2, imag(quat_mul(ac, b)) * INV_SQRT2)


# --------------------------------------------------------------------------
# rotations
# --------------------------------------------------------------------------
def rotation_from_unit_quat(a, tol=1e-9):
    """Matrix of ``x -> conj(a) x a`` acting on imaginary quaternions."""
    a = np.asarray(a, dtype=float)
    n = quat_norm(a)
    if np.any(np.abs(n - 1.0) > tol):
        raise NotUnit(f"quaternion norm {n} is not 1")
    ac = quat_conj(a)
    cols = [imag(quat_mul(quat_mul(ac, e), a)) for e in (QI, QJ, QK)]
    return np.stack(cols, axis=-1)


def rotate(a, x):
    """Apply ``R_a`` to 3-vectors ``x``."""
    return imag(quat_mul(quat_mul(quat_conj(a), pure(x)), a))


def graph_membership(p, gp, tol=1e-9):
    """Whether the plane ``gp`` contains the unit vector ``p``.

    Returns ``(member, defect)`` with ``defect = |minus - R_p(plus)|``.
    """
    defect = np.linalg.norm(np.asarray(gp.minus) - rotate(p, gp.plus), axis=-1)
    return defect <= tol, defect


# --------------------------------------------------------------------------
# tangent vectors and symplectic forms
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class TangentGrass:
    """Tangent vector ``a ^ w + v ^ b`` at the plane ``a ^ b``."""

    a: np.ndarray
    b: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("v", "w"):
            vec = np.asarray(getattr(self, name))
            for basis in (self.a, self.b):
                if np.any(np.abs(np.sum(vec * basis, axis=-1)) > 1e-12 * max(1.0, np.max(np.abs(vec)))):
                    raise BaseMismatch(f"{name} is not orthogonal to the base plane")

    def twovector(self):
        return wedge(self.a, self.w) + wedge(self.v, self.b)

    @classmethod
    def from_twovector(cls, a, b, xi):
        """Normal form of a raw 2-vector, orthogonally projected onto T Gr."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        m = twovector_matrix(xi)
        v = np.einsum("...ij,...j->...i", m, b)
        w = -np.einsum("...ij,...j->...i", m, a)
        return cls(a, b, _project_out(v, a, b), _project_out(w, a, b))


def _project_out(x, a, b):
    x = x - np.sum(x * a, axis=-1, keepdims=True) * a
    return x - np.sum(x * b, axis=-1, keepdims=True) * b


def symplectic_omega(t1, t2, tol=1e-9):
    """Kahler form of the Grassmannian on two tangent vectors at one point."""
    gap = np.linalg.norm(wedge(t1.a, t1.b) - wedge(t2.a, t2.b), axis=-1)
    if np.any(gap > tol):
        raise BaseMismatch(f"base planes differ by {np.max(gap):.3e}")
    return np.sum(t1.v * t2.w, axis=-1) - np.sum(t1.w * t2.v, axis=-1)


def omega_pm(at, x, y, tol=1e-8):
    """Area form on a sphere of radius 1/sqrt2 at the point ``at``."""
    at = np.asarray(at, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = np.linalg.norm(at, axis=-1) * max(1.0, float(np.max(np.abs(np.concatenate([x, y], axis=-1)))))
    for vec in (x, y):
        if np.any(np.abs(np.sum(vec * at, axis=-1)) > tol * scale):
            raise NotTangent("vector is not tangent to the sphere")
    p = pure(at * SQRT2)
    return np.sum(pure(x) * quat_mul(pure(y), p), axis=-1)


def d_iso_I(t):
    """Differential of ``I`` in quaternionic form on a tangent vector."""
    ac = quat_conj(t.a)
    vc = quat_conj(t.v)
    plus = imag(quat_mul(t.b, vc) + quat_mul(t.w, ac)) * INV_SQRT2
    minus = imag(quat_mul(ac, t.w) + quat_mul(vc, t.b)) * INV_SQRT2
    return plus, minus


def pullback_omega_difference(t1, t2):
    """``I^*(omega_+ - omega_-)`` evaluated through the quaternionic chart."""
    base = iso_I_quat(t1.a, t1.b)
    p1, m1 = d_iso_I(t1)
    p2, m2 = d_iso_I(t2)
    return omega_pm(base.plus, p1, p2, tol=1e-6) - omega_pm(base.minus, m1, m2, tol=1e-6)


def orthonormal_complement(p):
    """Three unit vectors completing ``p`` to a positively oriented basis."""
    p = np.asarray(p, dtype=float)
    p = p / np.linalg.norm(p)
    basis = [p]
    for e in np.eye(4)[np.argsort(np.abs(p))]:
        x = e - sum(np.dot(e, q) * q for q in basis)
        n = np.linalg.norm(x)
        if n > 1e-8:
            basis.append(x / n)
        if len(basis) == 4:
            break
    m = np.array(basis)
    if np.linalg.det(m) < 0:
        m[3] = -m[3]
    return m[1:]

