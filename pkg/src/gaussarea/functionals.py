"""Gauss-map area, total absolute curvature, degrees and the inequality chain."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InequalityViolation
from .kernels import theta_integral
from .quat_gr import TangentGrass, _project_out, d_iso_I, iso_I_quat, omega_pm
from .surface import frames_of

ANALYTIC_TOL = 1e-6
FD_TOL = 1e-3


def quadrature_tolerance(s):
    return ANALYTIC_TOL if getattr(s, "analytic", True) else FD_TOL


def area_gauss(s):
    """``int sqrt(1 + k1^2) sqrt(1 + k2^2) dA``."""
    return float(np.sum(frames_of(s).mu))


def total_abs_curvature(s, theta_nodes=512, mode="split"):
    """Volume swept by the unit normal bundle, by quadrature in the angle."""
    if theta_nodes < 64:
        raise ValueError("theta_nodes must be at least 64")
    fs = frames_of(s)
    inner = theta_integral(fs.kappa1, fs.kappa2, theta_nodes, mode)
    return float(np.sum(fs.dA * inner))


def gauss_bonnet(s):
    fs = frames_of(s)
    return float(np.sum(fs.dA * fs.K))


def signed_degree_F(s):
    """Degree of the normal-bundle map; the angular integral is ``pi (1 + k1 k2)``."""
    fs = frames_of(s)
    return float(np.sum(fs.dA * np.pi * (1.0 + fs.kappa1 * fs.kappa2)) / (2 * np.pi**2))


def _pushed_tangents(fs):
    a, b = fs.phi, fs.nu
    tu = TangentGrass(a, b, _project_out(fs.phi_u, a, b), _project_out(fs.nu_u, a, b))
    tv = TangentGrass(a, b, _project_out(fs.phi_v, a, b), _project_out(fs.nu_v, a, b))
    return d_iso_I(tu), d_iso_I(tv)


def pulled_back_factor_forms(s):
    """Per-sample ``(I o G)^* omega_(+/-)`` on ``(d_u, d_v)`` times the quadrature weight."""
    fs = frames_of(s)
    base = iso_I_quat(fs.phi, fs.nu)
    (pu, mu_), (pv, mv) = _pushed_tangents(fs)
    # the pushed vectors are tangent to the factor spheres up to roundoff
    plus = omega_pm(base.plus, pu, pv, tol=1e-6)
    minus = omega_pm(base.minus, mu_, mv, tol=1e-6)
    return fs.weight * plus, fs.weight * minus


def degree_pullback_plus(s):
    """``(1 / 2 pi) int (I o G)^* omega_+`` as ``(via_curvature, via_pullback)``."""
    via_k = gauss_bonnet(s) / (4 * np.pi)
    plus, _ = pulled_back_factor_forms(s)
    return via_k, float(np.sum(plus) / (2 * np.pi))


@dataclass
class FunctionalReport:
    label: str
    genus: int
    ag: float
    tac: float
    gauss_bonnet: float
    degree_plus: float
    degree_plus_direct: float
    signed_F_degree: float
    slack_ag: float
    slack_tac: float
    slack_chain: float
    tolerance: float

    CSV_COLUMNS = ("label", "genus", "ag", "tac", "slack_ag", "slack_tac", "slack_chain",
                   "degree_plus", "signed_F_degree")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps({"schema": 1, **self.to_dict()}, indent=2)

    def csv_row(self):
        d = self.to_dict()
        return {k: d[k] for k in self.CSV_COLUMNS}

    def append_csv(self, path):
        path = Path(path)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.CSV_COLUMNS)
            if new:
                writer.writeheader()
            writer.writerow(self.csv_row())

    @property
    def ok(self):
        return min(self.slack_ag, self.slack_tac, self.slack_chain) >= -self.tolerance


def inequality_chain(s, theta_nodes=512, mode="split", tol=None, raise_on_violation=True):
    """Evaluate every functional and the slacks of the lower-bound chain.

    Slacks are compared against ``tol`` scaled by the functional's size.
    A slack below ``-10 tol`` raises :class:`InequalityViolation`.
    """
    g = s.genus
    tol = quadrature_tolerance(s) if tol is None else tol
    ag = area_gauss(s)
    tac = total_abs_curvature(s, theta_nodes, mode)
    gb = gauss_bonnet(s)
    deg_a, deg_b = degree_pullback_plus(s)
    rep = FunctionalReport(
        label=s.label,
        genus=g,
        ag=ag,
        tac=tac,
        gauss_bonnet=gb,
        degree_plus=deg_a,
        degree_plus_direct=deg_b,
        signed_F_degree=signed_degree_F(s),
        slack_ag=ag - 4 * np.pi * (1 + g),
        slack_tac=tac - 2 * np.pi**2 * (2 * g + 2),
        slack_chain=ag - tac / np.pi,
        tolerance=tol * max(1.0, tac),
    )
    worst = min(rep.slack_ag, rep.slack_tac, rep.slack_chain)
    if raise_on_violation and worst < -10 * rep.tolerance:
        raise InequalityViolation(f"{s.label}: slack {worst:.3e} below tolerance", rep)
    return rep
