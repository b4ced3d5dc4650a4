import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gaussarea import quat_gr as qg
from gaussarea.errors import BaseMismatch, NonSimple, NotTangent, NotUnit

from conftest import random_orthonormal_pair

finite = st.floats(-10, 10, allow_nan=False)
quats = arrays(float, 4, elements=finite)


def test_basis_relations():
    assert np.allclose(qg.quat_mul(qg.QI, qg.QJ), qg.QK)
    assert np.allclose(qg.quat_mul(qg.QJ, qg.QK), qg.QI)
    assert np.allclose(qg.quat_mul(qg.QK, qg.QI), qg.QJ)
    for e in (qg.QI, qg.QJ, qg.QK):
        assert np.allclose(qg.quat_mul(e, e), -qg.ONE)


def test_identity_and_norm(rng):
    q = rng.normal(size=(1000, 4))
    p = rng.normal(size=(1000, 4))
    assert np.allclose(qg.quat_mul(qg.ONE, q), q)
    lhs = qg.quat_norm(qg.quat_mul(q, p))
    assert np.max(np.abs(lhs - qg.quat_norm(q) * qg.quat_norm(p))) < 1e-12 * np.max(lhs)


@settings(max_examples=50, deadline=None)
@given(quats, quats, quats)
def test_associative(a, b, c):
    lhs = qg.quat_mul(qg.quat_mul(a, b), c)
    rhs = qg.quat_mul(a, qg.quat_mul(b, c))
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_wedge_basics(rng):
    xi = qg.wedge(qg.ONE, qg.QI)
    assert np.allclose(xi, [1, 0, 0, 0, 0, 0])
    a = rng.normal(size=4)
    assert np.allclose(qg.wedge(a, a), 0.0)
    a = rng.normal(size=(200, 4))
    b = rng.normal(size=(200, 4))
    lagrange = np.sum(a * a, -1) * np.sum(b * b, -1) - np.sum(a * b, -1) ** 2
    assert np.allclose(np.sum(qg.wedge(a, b) ** 2, -1), lagrange)
    assert np.allclose(qg.wedge_square(qg.wedge(a, b)), 0.0, atol=1e-12)


def test_hodge(rng):
    assert np.allclose(qg.hodge_star([1, 0, 0, 0, 0, 0]), [0, 0, 0, 1, 0, 0])
    xi = rng.normal(size=(100, 6))
    eta = rng.normal(size=(100, 6))
    assert np.allclose(qg.hodge_star(qg.hodge_star(xi)), xi)
    assert np.allclose(np.sum(qg.hodge_star(xi) * qg.hodge_star(eta), -1), np.sum(xi * eta, -1))


def test_hodge_matches_volume_form(rng):
    # <xi ^ eta, vol> = <eta, *xi> for the chosen basis orientation
    a, b = rng.normal(size=(2, 4))
    c, d = rng.normal(size=(2, 4))
    det = np.linalg.det(np.array([a, b, c, d]))
    assert np.isclose(np.dot(qg.hodge_star(qg.wedge(a, b)), qg.wedge(c, d)), det)


def test_iso_basis_element():
    gp = qg.iso_I([1, 0, 0, 0, 0, 0])
    assert np.allclose(gp.plus, [qg.INV_SQRT2, 0, 0])
    assert np.allclose(gp.minus, [qg.INV_SQRT2, 0, 0])


def test_iso_formulas_agree(rng):
    a, b = random_orthonormal_pair(rng, 10_000)
    gp1 = qg.iso_I(qg.wedge(a, b))
    gp2 = qg.iso_I_quat(a, b)
    assert np.max(np.abs(gp1.as_array() - gp2.as_array())) < 1e-12
    assert np.max(np.abs(np.linalg.norm(gp1.plus, axis=-1) - qg.INV_SQRT2)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(gp1.minus, axis=-1) - qg.INV_SQRT2)) < 1e-12
    back = qg.iso_I_inverse(gp1)
    assert np.allclose(back, qg.wedge(a, b), atol=1e-13)


def test_iso_is_isometry(rng):
    xi = rng.normal(size=(50, 6))
    gp = qg.iso_I_linear(xi)
    assert np.allclose(np.linalg.norm(gp.as_array(), axis=-1), np.linalg.norm(xi, axis=-1))


def test_non_simple_rejected():
    with pytest.raises(NonSimple):
        qg.iso_I([1, 0, 0, 1, 0, 0])


def test_rotations(rng):
    assert np.allclose(qg.rotation_from_unit_quat(qg.ONE), np.eye(3))
    assert np.allclose(qg.rotation_from_unit_quat(qg.QI), np.diag([1, -1, -1]))
    a = rng.normal(size=(20, 4))
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    r = qg.rotation_from_unit_quat(a)
    assert np.allclose(r, qg.rotation_from_unit_quat(-a))
    assert np.allclose(np.einsum("nji,njk->nik", r, r), np.eye(3), atol=1e-10)
    assert np.allclose(np.linalg.det(r), 1.0, atol=1e-10)
    with pytest.raises(NotUnit):
        qg.rotation_from_unit_quat([1.0, 0.1, 0, 0])


def test_graph_membership(rng):
    p, v = random_orthonormal_pair(rng, 500)
    member, defect = qg.graph_membership(p, qg.iso_I(qg.wedge(p, v)))
    assert member.all() and defect.max() <= 1e-10
    member, _ = qg.graph_membership(qg.ONE, qg.iso_I(qg.wedge(qg.QJ, qg.QK)))
    assert not member


def test_graph_membership_sweep(rng):
    p = rng.normal(size=(1000, 4))
    p /= np.linalg.norm(p, axis=-1, keepdims=True)
    a, b = random_orthonormal_pair(rng, 1000)
    # half the planes are forced through p
    b[:500] = p[:500] - np.sum(p[:500] * a[:500], -1, keepdims=True) * a[:500]
    b[:500] /= np.linalg.norm(b[:500], axis=-1, keepdims=True)
    member, _ = qg.graph_membership(p, qg.iso_I(qg.wedge(a, b)), tol=1e-8)
    proj = np.sum(p * a, -1)[:, None] * a + np.sum(p * b, -1)[:, None] * b
    direct = np.linalg.norm(p - proj, axis=-1) < 1e-8
    assert np.array_equal(member, direct)
    assert direct[:500].all() and not direct[500:].any()


def _random_tangent(rng, a, b):
    v = qg._project_out(rng.normal(size=4), a, b)
    w = qg._project_out(rng.normal(size=4), a, b)
    return qg.TangentGrass(a, b, v, w)


def test_symplectic_omega(rng):
    a, b = random_orthonormal_pair(rng)
    t = _random_tangent(rng, a, b)
    assert qg.symplectic_omega(t, t) == pytest.approx(0.0, abs=1e-14)
    e = qg._project_out(rng.normal(size=4), a, b)
    e /= np.linalg.norm(e)
    t1 = qg.TangentGrass(a, b, e, np.zeros(4))
    t2 = qg.TangentGrass(a, b, np.zeros(4), e)
    assert qg.symplectic_omega(t1, t2) == pytest.approx(1.0)
    other = qg.TangentGrass(b, -a, np.zeros(4), np.zeros(4))
    assert qg.symplectic_omega(t1, other) == pytest.approx(0.0)
    c, d = random_orthonormal_pair(rng)
    with pytest.raises(BaseMismatch):
        qg.symplectic_omega(t1, _random_tangent(rng, c, d))


def test_symplectomorphism(rng):
    for _ in range(200):
        a, b = random_orthonormal_pair(rng)
        t1 = _random_tangent(rng, a, b)
        t2 = _random_tangent(rng, a, b)
        lhs = qg.pullback_omega_difference(t1, t2)
        assert abs(lhs - qg.symplectic_omega(t1, t2)) < 1e-10


def test_tangent_normal_form_roundtrip(rng):
    a, b = random_orthonormal_pair(rng)
    t = _random_tangent(rng, a, b)
    t2 = qg.TangentGrass.from_twovector(a, b, t.twovector())
    assert np.allclose(t.v, t2.v) and np.allclose(t.w, t2.w)


def test_omega_pm_total_area():
    n_t, n_p = 400, 800
    th = (np.arange(n_t) + 0.5) * np.pi / n_t
    ph = np.arange(n_p) * 2 * np.pi / n_p
    T, P = np.meshgrid(th, ph, indexing="ij")
    r = qg.INV_SQRT2
    at = r * np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1)
    d_th = r * np.stack([np.cos(T) * np.cos(P), np.cos(T) * np.sin(P), -np.sin(T)], -1)
    d_ph = r * np.stack([-np.sin(T) * np.sin(P), np.sin(T) * np.cos(P), 0 * T], -1)
    total = np.sum(qg.omega_pm(at, d_th, d_ph)) * (np.pi / n_t) * (2 * np.pi / n_p)
    assert abs(abs(total) - 2 * np.pi) < 1e-4


def test_omega_pm_antisymmetric(rng):
    at = rng.normal(size=3)
    at *= qg.INV_SQRT2 / np.linalg.norm(at)
    x, y = rng.normal(size=(2, 3))
    x -= np.dot(x, at) / np.dot(at, at) * at
    y -= np.dot(y, at) / np.dot(at, at) * at
    assert qg.omega_pm(at, x, x) == pytest.approx(0.0, abs=1e-14)
    assert qg.omega_pm(at, x, y) == pytest.approx(-qg.omega_pm(at, y, x))
    with pytest.raises(NotTangent):
        qg.omega_pm(at, at, y)


def test_json_roundtrip(rng):
    a, b = random_orthonormal_pair(rng)
    gp = qg.iso_I_quat(a, b)
    back = qg.GrassPoint.from_json(gp.to_json())
    assert np.array_equal(back.as_array(), gp.as_array())
