"""Measure-level checks of concentration: Gauss measures, ball masses and sphere fits."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import DegenerateFit, OutOfRange
from .functionals import pulled_back_factor_forms
from .quat_gr import orthonormal_complement, wedge
from .spatial import SurfaceIndex, chord_to_geodesic
from .surface import BASE_RESOLUTION, frames_of

BALL_RADII = (0.1, 0.2)
ATOM_FACTOR = 3.0
N_CELLS = 32
# spacing of a unit-scale chart grid at the base resolution; spheres smaller
# than twice this cannot be told apart from a point by the sampled measures
SAMPLING_RADIUS = np.pi / BASE_RESOLUTION


@dataclass
class MeasureAtlas:
    """Weighted samples in ``Sigma`` (chart, u, v), ``S3`` or ``Grass`` (Lambda^2 R^4)."""

    points: np.ndarray
    weights: np.ndarray
    space_tag: str
    frames: object = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0):
            raise OutOfRange("measure weights must be non-negative")
        if len(self.points) != len(self.weights):
            raise OutOfRange("points and weights differ in length")

    @property
    def total(self):
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)


def gauss_measure(s):
    """Gauss area measure ``mu`` on the parameter domain of ``s``."""
    fs = frames_of(s)
    pts = np.column_stack([fs.chart, fs.u, fs.v]).astype(float)
    return MeasureAtlas(pts, fs.mu, "Sigma", fs)


def pushforward_S3(m):
    return MeasureAtlas(m.frames.phi, m.weights, "S3", m.frames)


def pushforward_grass(m):
    return MeasureAtlas(wedge(m.frames.phi, m.frames.nu), m.weights, "Grass", m.frames)


def geodesic_to(points, p):
    """Geodesic distance on S^3, accurate for nearby points."""
    return chord_to_geodesic(np.linalg.norm(np.asarray(points) - np.asarray(p), axis=-1))


def ball_mass(m, p, eps):
    """Mass of the S^3 measure ``m`` within geodesic distance ``eps`` of ``p``."""
    if m.space_tag != "S3":
        raise OutOfRange("ball_mass needs a measure on S^3")
    return float(np.sum(m.weights[geodesic_to(m.points, p) < eps]))


def cap_fraction(eps, R):
    """Area fraction of a round sphere of radius ``R`` inside a ball of radius
    ``eps`` centred on the sphere."""
    if R <= 0:
        return 1.0
    half = np.sin(eps / 2.0) / np.sin(R)
    if half >= 1.0:
        return 1.0
    cos_a = 1.0 - 2.0 * half * half
    return 0.5 * (1.0 - cos_a)


@dataclass
class SphereFit:
    center: np.ndarray
    R: float
    hausdorff: float
    rms: float
    degenerate: bool = False

    def to_dict(self):
        return {"center": [float(x) for x in self.center], "R": self.R, "hausdorff": self.hausdorff,
                "rms": self.rms, "degenerate": self.degenerate}


def _plane_fit(phi):
    """Hyperplane ``<x, n> = c`` through the points by total least squares."""
    mean = phi.mean(axis=0)
    _, _, vt = np.linalg.svd(phi - mean, full_matrices=False)
    n = vt[-1]
    c = float(np.dot(mean, n))
    return (n, c) if c >= 0 else (-n, -c)


def fibonacci_sphere(center, R, n):
    """``n`` nearly uniform points on the geodesic sphere of radius ``R`` about ``center``."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    t = np.pi * (1.0 + np.sqrt(5.0)) * i
    w = np.sqrt(1.0 - z * z)
    e = np.column_stack([w * np.cos(t), w * np.sin(t), z])
    return np.cos(R) * center + np.sin(R) * (e @ orthonormal_complement(center))


def _minimax_polish(phi, center, a, k=64, rounds=20):
    """Exact minimax centre by an epigraph problem on the extreme samples.

    Only the samples nearest and farthest from the centre bind, so each
    round solves ``min s`` subject to ``|d_i - R| <= s`` over the ``k``
    extremes on either side and then checks the whole cloud.
    """
    best, best_val = a, None
    active = np.zeros(0, dtype=int)
    for _ in range(rounds):
        d = geodesic_to(phi, center(best))
        val = 0.5 * (d.max() - d.min())
        if best_val is not None and val >= best_val * (1 - 1e-12):
            break
        best_val = val
        order = np.argsort(d)
        active = np.union1d(active, np.concatenate([order[:k], order[-k:]]))
        sub = phi[active]

        def band(x):
            r = geodesic_to(sub, center(x[:3])) - x[3]
            return np.concatenate([x[4] - r, x[4] + r])

        x0 = np.r_[best, 0.5 * (d.max() + d.min()), val]
        res = minimize(lambda x: x[4], x0, jac=lambda x: np.r_[0, 0, 0, 0, 1.0], method="SLSQP",
                       constraints=[{"type": "ineq", "fun": band}], options={"ftol": 1e-16, "maxiter": 200})
        cand = res.x[:3]
        dc = geodesic_to(phi, center(cand))
        if 0.5 * (dc.max() - dc.min()) < val:
            best = cand
    return best


def sphere_fit(s, probes=2000, index=None, raise_degenerate=True):
    """Round sphere minimising the largest deviation ``|dist(phi, p0) - R|``.

    The total-least-squares hyperplane gives the starting sphere.  Nelder-Mead
    on the minimax objective is the coarse search and an epigraph solve on
    the extreme samples the refinement.  The Hausdorff
    distance takes the surface side from the sample cloud and the sphere
    side from projections of ``probes`` sphere points onto the surface.
    """
    index = index or SurfaceIndex(s)
    phi = np.concatenate([frames_of(s).phi, index.points])
    n, c = _plane_fit(phi)
    basis = orthonormal_complement(n)

    def center(a):
        p = n + a @ basis
        return p / np.linalg.norm(p)

    def spread(a):
        d = geodesic_to(phi, center(a))
        return 0.5 * (d.max() - d.min())

    res = minimize(spread, np.zeros(3), method="Nelder-Mead",
                   options={"xatol": 1e-13, "fatol": 1e-16, "maxiter": 4000})
    a = res.x if res.fun <= spread(np.zeros(3)) else np.zeros(3)
    a = _minimax_polish(phi, center, a)
    p0 = center(a)
    d = geodesic_to(phi, p0)
    R = 0.5 * (d.max() + d.min())
    if R > np.pi / 2:
        p0, d, R = -p0, np.pi - d, np.pi - R
    dev = d - R
    # the other side: how far the fitted sphere strays from the samples
    back = index.distance(fibonacci_sphere(p0, R, probes))
    haus = max(float(np.max(np.abs(dev))), float(np.max(back)))
    fit = SphereFit(p0, float(R), haus, float(np.sqrt(np.mean(dev**2))))
    if R < 2.0 * SAMPLING_RADIUS:
        fit.degenerate = True
        if raise_degenerate:
            raise DegenerateFit(f"fitted radius {R:.3g} is below the sampling scale", fit)
    return fit


def factor_degrees(s):
    """``(d_plus, d_minus)``: pulled-back factor areas over ``2 pi``."""
    plus, minus = pulled_back_factor_forms(s)
    return float(np.sum(plus) / (2 * np.pi)), float(np.sum(minus) / (2 * np.pi))


@dataclass
class Atom:
    point: np.ndarray
    mass_eps1: float
    mass_eps2: float
    background_eps1: float
    background_eps2: float

    @property
    def mass(self):
        """Atomic part: the wider ball mass less the matching background."""
        return self.mass_eps2 - self.background_eps2

    @property
    def detected(self):
        return self.mass_eps1 > ATOM_FACTOR * self.background_eps1

    def to_dict(self):
        return {"point": [float(x) for x in self.point], "mass_eps1": self.mass_eps1,
                "mass_eps2": self.mass_eps2, "mass": self.mass, "detected": bool(self.detected)}


@dataclass
class BubblingReport:
    fit: SphereFit
    degrees: tuple
    atoms: list
    residual: float
    cell_deviation: float
    total: float

    def to_dict(self):
        return {
            "schema": 1,
            "fit": self.fit.to_dict(),
            "degrees": list(self.degrees),
            "atoms": [a.to_dict() for a in self.atoms if a.detected],
            "candidates": [a.to_dict() for a in self.atoms],
            "residual": self.residual,
            "cell_deviation": self.cell_deviation,
            "total": self.total,
        }

    def write_ball_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "x0", "x1", "x2", "x3", "eps", "mass", "background"])
            for i, a in enumerate(self.atoms):
                for eps, m, b in zip(BALL_RADII, (a.mass_eps1, a.mass_eps2), (a.background_eps1, a.background_eps2)):
                    w.writerow([i, *map(repr, map(float, a.point)), eps, repr(m), repr(b)])


def _background_cells(fit, centers, excluded, n=200_000):
    """``gamma_S`` mass of each Voronoi cell, away from the excluded balls."""
    pts = fibonacci_sphere(fit.center, fit.R, n)
    keep = np.ones(n, dtype=bool)
    for p in excluded:
        keep &= geodesic_to(pts, p) >= BALL_RADII[1]
    _, cell = cKDTree(centers).query(pts[keep], k=1)
    return np.bincount(cell, minlength=len(centers)) * (4 * np.pi / n)


def bubbling_report(s, candidate_points=(), fit=None, index=None):
    """Split the Gauss measure on S^3 into a round background and atoms.

    Each candidate gets ball masses at the two radii of ``BALL_RADII`` and
    the background ``gamma_S`` of the same balls.  Away from all candidate
    balls the measure is binned into Voronoi cells about nearly uniform
    centres on the fitted sphere and compared with ``gamma_S``.
    """
    if fit is None:
        fit = sphere_fit(s, index=index, raise_degenerate=False)
    m = pushforward_S3(gauss_measure(s))
    cands = [np.asarray(p, dtype=float) for p in candidate_points]
    atoms = []
    for p in cands:
        masses = [ball_mass(m, p, eps) for eps in BALL_RADII]
        bg = [0.0 if fit.degenerate else 4 * np.pi * cap_fraction(eps, fit.R) for eps in BALL_RADII]
        atoms.append(Atom(p, *masses, *bg))
    if fit.degenerate:
        # the background is itself a point mass: nothing left to bin
        residual, worst = float("nan"), float("nan")
    else:
        centers = fibonacci_sphere(fit.center, fit.R, N_CELLS)
        keep = np.ones(len(m), dtype=bool)
        for p in cands:
            keep &= geodesic_to(m.points, p) >= BALL_RADII[1]
        _, cell = cKDTree(centers).query(m.points[keep], k=1)
        got = np.bincount(cell, weights=m.weights[keep], minlength=N_CELLS)
        want = _background_cells(fit, centers, cands)
        residual = float(np.sum(np.abs(got - want)))
        live = want > 0.5 * want.max()
        worst = float(np.max(np.abs(got - want)[live] / want[live]))
    return BubblingReport(fit, factor_degrees(s), atoms, residual, worst, m.total)
