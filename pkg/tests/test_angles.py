import csv

import numpy as np
import pytest

from gaussarea import angles as ag
from gaussarea.errors import IndexTooCoarse, OutOfRange
from gaussarea.functionals import total_abs_curvature
from gaussarea.gallery import product_torus, round_sphere
from gaussarea.spatial import SurfaceIndex
from gaussarea.surface import FrameSet

from conftest import built


def test_lambda_values():
    assert np.allclose(ag.lambda_functions(np.pi), (np.pi, 0.0), atol=1e-15)
    assert np.allclose(ag.lambda_functions(np.pi / 2), (1.0, 1.0), atol=1e-15)


def test_lambda_domain():
    for bad in (0.0, -0.1, 4.0, np.nan):
        with pytest.raises(OutOfRange):
            ag.lambda_functions(bad)


def test_lambda_reflection():
    t = np.linspace(0.01, np.pi - 0.01, 200)
    l0, lp = ag.lambda_functions(t)
    r0, _ = ag.lambda_functions(np.pi - t)
    assert np.allclose(lp, r0, atol=1e-14)


@pytest.mark.parametrize("t1,t2,want", [(-np.pi / 2, np.pi / 2, (np.pi / 2, 0.0)),
                                        (-np.pi / 4, np.pi / 4, (0.5, 0.5))])
def test_oracle_examples(t1, t2, want):
    assert np.allclose(ag.lambda_integral_oracle(t1, t2), want, atol=1e-10)


def test_oracle_agrees(rng):
    for _ in range(40):
        t1 = rng.uniform(-np.pi, 0)
        t2 = rng.uniform(0, np.pi / 2)
        if t2 - t1 > np.pi:
            continue
        pos, neg = ag.lambda_integral_oracle(t1, t2)
        l0, lp = ag.lambda_functions(t2 - t1)
        assert abs(2 * pos - l0) < 1e-9 and abs(2 * neg - lp) < 1e-9


def test_lambda0_increasing():
    t = np.linspace(1e-4, np.pi, 100_000)
    l0, _ = ag.lambda_functions(t)
    assert np.all(np.diff(l0) > 0)


def test_lambda_constants_positive():
    c = ag.lambda_constants()
    assert c["gap_over_min"] > 0 and c["lambda0_over_t2"] > 0
    # lambda_0 ~ t^3 / 3 near 0, so the ratio to t^2 is small but positive
    assert c["lambda0_over_t2"] < 0.01


def test_sphere_profiles():
    r = 1.1
    pr = ag.angle_profiles(round_sphere(r=r))
    # the normal points away from the centre, so the focal angles are pi - r
    assert np.allclose(pr.theta_tilde_1, np.pi - r) and np.allclose(pr.theta_tilde_2, np.pi - r)
    assert np.allclose(pr.theta_hat, np.pi)
    assert pr.sigma_pi.all()


@pytest.mark.parametrize("rho", [0.3, 1 / np.sqrt(2), 0.8])
def test_torus_profiles(rho):
    pr = ag.angle_profiles(product_torus(rho))
    assert np.max(np.abs(pr.theta_hat - np.pi / 2)) < 1e-8
    assert np.allclose(pr.theta_tilde_1, pr.theta_tilde_2 + np.pi / 2)
    # theta_hat = pi/2 belongs to Sigma_0
    assert pr.sigma_0.all()


def test_minimal_surface_sample():
    k = np.array([0.2, 1.0, 3.0, 40.0])
    fs = FrameSet(kappa1=k, kappa2=-k, weight=np.ones(4), jac_G=np.ones(4))
    pr = ag.angle_profiles(fs)
    direct = np.arctan2(1, k) - (np.arctan2(1, -k) - np.pi)
    assert np.allclose(pr.theta_hat, direct)
    assert np.allclose(pr.theta_hat, 2 * ag.arccot(k))
    assert list(pr.region()) == ["sigmapi", "sigma0", "sigma0", "sigma0"]


@pytest.mark.parametrize("spec", ["sphere:r=0.6", "torus:rho=0.45", "perturbed:r=1.0:a=0.05:seed=0"])
def test_lambda_identities_analytic(spec):
    s = built(spec)
    t = total_abs_curvature(s)
    assert abs(ag.lambda_tac(s) - t) <= 1e-5 * t
    want = 4 * np.pi**2 * (1 - s.genus)
    assert abs(ag.lambda_degree(s) - want) <= 1e-4 * max(1.0, abs(want))


def every(s, k):
    return np.arange(0, len(s.frames()), k)


@pytest.mark.parametrize("r", [0.6, 1.0, np.pi / 2, 2.0])
def test_theta_pm_sphere(r):
    s = round_sphere(r=r)
    minus, plus, search = ag.theta_pm(s, samples=every(s, 97))
    tol = ag.nesting_tolerance(search)
    assert np.max(np.abs(plus - (np.pi - r))) <= tol
    assert np.max(np.abs(minus + r)) <= tol


def test_theta_pm_clifford():
    s = product_torus(1 / np.sqrt(2))
    minus, plus, search = ag.theta_pm(s, samples=every(s, 61))
    tol = ag.nesting_tolerance(search)
    assert np.max(np.abs(plus - np.pi / 4)) <= tol
    assert np.max(np.abs(minus + np.pi / 4)) <= tol


def test_theta_pm_cloud_only():
    s = round_sphere(r=1.0)
    ix = SurfaceIndex(s, density=8.0)
    minus, plus, search = ag.theta_pm(s, index=ix, samples=every(s, 301), refine=False)
    tol = ag.nesting_tolerance(search)
    assert np.max(np.abs(plus - (np.pi - 1.0))) <= tol


def test_coarse_index_rejected():
    s = round_sphere(r=1.0)
    with pytest.raises(IndexTooCoarse):
        ag.theta_pm(s, samples=[0], slack=1e-6, refine=False)


def test_nesting_matches_search(glued1):
    idx = np.random.default_rng(5).choice(len(glued1.frames()), 60, replace=False)
    pr = ag.angle_profiles(glued1)
    minus, plus, search = ag.theta_pm(glued1, samples=idx)
    tol = ag.nesting_tolerance(search)
    m_ok, p_ok, _ = ag.nesting_check(glued1, index=search.index, samples=idx)
    assert np.array_equal(p_ok, plus <= pr.theta_2[idx] + tol)
    assert np.array_equal(m_ok, minus >= pr.theta_1[idx] - tol)
    assert m_ok.all() and p_ok.all()
    # on the neck |theta_1| and theta_2 fall below one step and round to 0
    assert np.all(minus <= 0) and np.all(plus >= 0)


def test_estimates_sphere():
    s = round_sphere(r=1.0)
    est = ag.minimizer_estimates(s, n_samples=64)
    assert abs(est.mu_sigma_pi - 4 * np.pi) < 1e-6
    # umbilic eigenvalues split by sqrt(roundoff), about 1e-8
    assert abs(est.int_pi_minus_theta_hat) < 1e-6
    assert abs(est.delta) < 1e-6
    # each gap is within the nesting tolerance on both sides
    assert est.int_interval_gap < 4 * np.pi * 2 * 0.01
    assert est.best_point >= 0


def test_estimates_torus():
    est = ag.minimizer_estimates(product_torus(0.5))
    assert est.mu_sigma_pi == 0 and est.int_interval_gap == 0 and est.best_point == -1
    assert est.delta > 0


def test_estimates_glued(glued1):
    est = ag.minimizer_estimates(glued1, n_samples=100)
    assert est.mu_sigma_pi >= 4 * np.pi - 1.0
    assert est.int_pi_minus_theta_hat <= 1.0
    again = ag.minimizer_estimates(glued1, n_samples=100)
    assert again == est


def test_profile_csv(tmp_path):
    s = round_sphere(r=1.0, resolution=8)
    pr = ag.fill_theta_pm(s, ag.angle_profiles(s), samples=None)
    pr.write_csv(tmp_path / "p.csv")
    rows = list(csv.DictReader((tmp_path / "p.csv").open()))
    assert tuple(rows[0]) == ag.AngleProfiles.CSV_COLUMNS
    assert len(rows) == len(s.frames())
    assert {r["region"] for r in rows} == {"sigmapi"}
    assert abs(float(rows[0]["theta_plus"]) - (np.pi - 1.0)) < 0.05
