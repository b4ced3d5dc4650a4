import csv
import json

import numpy as np
import pytest

from gaussarea import functionals as fn
from gaussarea.errors import InequalityViolation
from gaussarea.gallery import product_torus, round_sphere
from gaussarea.surface import ChartedSurface

from conftest import built

RADII = (0.3, 0.9, np.pi / 2, 2.0)
RHOS = (0.3, 0.5, 1 / np.sqrt(2), 0.8)


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.mark.parametrize("r", RADII)
def test_sphere_functionals(r):
    s = round_sphere(r=r)
    assert rel(fn.area_gauss(s), 4 * np.pi) < 1e-6
    assert rel(fn.total_abs_curvature(s), 4 * np.pi**2) < 1e-4
    assert abs(fn.signed_degree_F(s) - 2) < 1e-6
    a, b = fn.degree_pullback_plus(s)
    assert abs(a - 1) < 1e-6 and abs(b - 1) < 1e-6


@pytest.mark.parametrize("rho", RHOS)
def test_torus_functionals(rho):
    s = product_torus(rho)
    assert rel(fn.area_gauss(s), 4 * np.pi**2) < 1e-6
    assert rel(fn.total_abs_curvature(s), 8 * np.pi**2) < 1e-4
    assert abs(fn.signed_degree_F(s)) < 1e-6
    a, b = fn.degree_pullback_plus(s)
    assert abs(a) < 1e-6 and abs(b) < 1e-6


def test_trapezoid_mode_close():
    s = product_torus(0.4)
    t = fn.total_abs_curvature(s, 512, mode="trapezoid")
    assert rel(t, 8 * np.pi**2) < 1e-4


def test_theta_nodes_floor():
    with pytest.raises(ValueError):
        fn.total_abs_curvature(round_sphere(), theta_nodes=32)


@pytest.mark.parametrize("spec", ["sphere:r=0.9", "torus:rho=0.6", "perturbed:r=1.0:a=0.05:seed=0"])
def test_refinement_stability(spec):
    s = built(spec)
    fine = s.with_resolution(128)
    for f in (fn.area_gauss, fn.total_abs_curvature):
        assert rel(f(s), f(fine)) < 1e-7


def test_pointwise_chain_integrand():
    # pi * sqrt(1+k1^2) sqrt(1+k2^2) bounds the angular integral sample by sample
    from gaussarea.kernels import theta_integral

    fs = built("perturbed:r=1.0:a=0.05:seed=0").frames()
    inner = theta_integral(fs.kappa1, fs.kappa2)
    bound = np.pi * np.sqrt((1 + fs.kappa1**2) * (1 + fs.kappa2**2))
    assert np.all(inner <= bound * (1 + 1e-12))


def test_sphere_chain_equality():
    rep = fn.inequality_chain(round_sphere(r=0.9))
    assert abs(rep.slack_chain) < 1e-6 and abs(rep.slack_ag) < 1e-5 and rep.ok


def test_torus_slack():
    rep = fn.inequality_chain(product_torus(0.5))
    assert abs(rep.slack_ag - (4 * np.pi**2 - 8 * np.pi)) < 1e-5
    assert rep.slack_chain > 0 and rep.ok


def test_glued_degrees(glued1):
    assert abs(fn.signed_degree_F(glued1)) < 1e-2
    a, b = fn.degree_pullback_plus(glued1)
    assert abs(a) < 2e-2 and abs(b) < 2e-2


def test_glued_slack_trend():
    slack = [fn.inequality_chain(built(f"handles:g=1:h={h}")).slack_ag for h in (0.1, 0.05, 0.02)]
    assert all(x > 0 for x in slack)
    assert slack[0] > slack[1] > slack[2]


def test_violation_raises():
    # a sphere declared to have a handle must violate the genus bound
    s = round_sphere(r=1.0)
    fake = ChartedSurface(s.charts, 1, "fake")
    with pytest.raises(InequalityViolation) as exc:
        fn.inequality_chain(fake)
    assert exc.value.report.slack_ag < 0
    rep = fn.inequality_chain(fake, raise_on_violation=False)
    assert not rep.ok


def test_report_formats(tmp_path):
    rep = fn.inequality_chain(product_torus(0.5, resolution=32))
    data = json.loads(rep.to_json())
    assert data["schema"] == 1 and data["genus"] == 1
    path = tmp_path / "out.csv"
    rep.append_csv(path)
    rep.append_csv(path)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 2
    assert tuple(rows[0]) == fn.FunctionalReport.CSV_COLUMNS
    assert float(rows[0]["ag"]) == rep.ag


def test_tolerance_by_derivative_mode():
    s = round_sphere(resolution=16)
    assert fn.quadrature_tolerance(s) == fn.ANALYTIC_TOL
    assert fn.quadrature_tolerance(s.with_derivative_mode("fd")) == fn.FD_TOL
