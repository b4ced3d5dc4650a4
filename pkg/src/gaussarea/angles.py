"""Angle calculus of the principal curvatures.

Each principal curvature ``k`` corresponds to the angle ``arccot k`` in
``(0, pi)`` at which the normal geodesic ``cos t phi + sin t nu`` meets a
focal point.  With ``k1 >= k2`` the smaller angle is ``arccot k1``; it is
labelled ``theta_tilde_2`` so that ``theta_tilde_2 <= theta_tilde_1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .errors import IndexTooCoarse, OutOfRange
from .functionals import area_gauss
from .spatial import SurfaceIndex
from .surface import frames_of

DEFAULT_DT = np.pi / 2000
# distance deficits past a focal point scale with the square of the feature
# size, so the floor must sit well below (1e-5)^2 yet above rounding
SLACK_FLOOR = 1e-13
# theta_hat = pi/2 belongs to Sigma_0; arctan roundoff must not move it out
REGION_EPS = 1e-12


def arccot(k):
    return np.arctan2(1.0, np.asarray(k, dtype=float))


def lambda_functions(theta_hat):
    """``(sin t - t cos t, sin t + (pi - t) cos t)`` for ``t`` in ``(0, pi]``."""
    t = np.asarray(theta_hat, dtype=float)
    if np.any(~(t > 0.0)) or np.any(t > np.pi + 1e-12):
        raise OutOfRange("theta_hat must lie in (0, pi]")
    t = np.minimum(t, np.pi)
    s, c = np.sin(t), np.cos(t)
    return s - t * c, s + (np.pi - t) * c


def lambda_integral_oracle(theta_1, theta_2):
    """Half-lambdas by adaptive quadrature over the two arcs of a half turn."""

    def f(t):
        return np.sin(t - theta_1) * np.sin(theta_2 - t)

    pos, _ = quad(f, theta_1, theta_2, epsabs=1e-14, epsrel=1e-13)
    neg, _ = quad(lambda t: abs(f(t)), theta_2, theta_1 + np.pi, epsabs=1e-14, epsrel=1e-13)
    return pos, neg


class AngleProfiles:
    """Per-sample angle data as arrays aligned with the surface frames."""

    def __init__(self, fs, **cols):
        self.frames = fs
        for k, v in cols.items():
            setattr(self, k, v)
        n = len(fs)
        self.theta_minus = np.full(n, np.nan)
        self.theta_plus = np.full(n, np.nan)

    def __len__(self):
        return len(self.theta_hat)

    @property
    def sigma_pi(self):
        return ~self.sigma_0

    def region(self):
        return np.where(self.sigma_0, "sigma0", "sigmapi")

    CSV_COLUMNS = ("chart", "u", "v", "kappa1", "kappa2", "theta_hat", "lambda0", "lambdapi",
                   "region", "theta_minus", "theta_plus", "weight")

    def write_csv(self, path):
        fs = self.frames
        cols = [fs.chart, fs.u, fs.v, fs.kappa1, fs.kappa2, self.theta_hat, self.lambda_0,
                self.lambda_pi, self.region(), self.theta_minus, self.theta_plus, fs.mu]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for row in zip(*cols):
                w.writerow([r if isinstance(r, str) else repr(float(r)) for r in row])


def angle_profiles(s):
    fs = frames_of(s)
    tt2 = arccot(fs.kappa1)
    tt1 = arccot(fs.kappa2)
    th1 = tt1 - np.pi
    th2 = tt2
    th_hat = th2 - th1
    lam0, lampi = lambda_functions(th_hat)
    return AngleProfiles(
        fs,
        theta_tilde_1=tt1, theta_tilde_2=tt2, theta_1=th1, theta_2=th2,
        theta_hat=th_hat, lambda_0=lam0, lambda_pi=lampi,
        sigma_0=th_hat <= np.pi / 2 + REGION_EPS,
    )


def lambda_tac(s, profiles=None):
    """Total absolute curvature as ``int (lambda_0 + lambda_pi) d mu``."""
    pr = profiles or angle_profiles(s)
    return float(np.sum((pr.lambda_0 + pr.lambda_pi) * pr.frames.mu))


def lambda_degree(s, profiles=None):
    """``int (lambda_0 - lambda_pi) d mu``, which equals ``4 pi^2 (1 - g)``."""
    pr = profiles or angle_profiles(s)
    return float(np.sum((pr.lambda_0 - pr.lambda_pi) * pr.frames.mu))


@dataclass
class ThetaSearch:
    index: SurfaceIndex
    dt: float
    slack: float
    refine: bool


def _make_search(s, index, dt, slack, refine):
    index = index or SurfaceIndex(s)
    oracle_err = index.refined_error() if refine else index.covering_radius
    if slack is None:
        slack = max(2.0 * oracle_err, SLACK_FLOOR)
    if oracle_err > slack / 2:
        raise IndexTooCoarse(f"oracle error {oracle_err:.2e} exceeds half the slack {slack:.2e}")
    return ThetaSearch(index, dt, slack, refine)


def _passes(search, phi, nu, t, sign):
    """Whether ``dist(gamma(t), surface) >= t - slack`` for each sample."""
    y = phi * np.cos(t)[:, None] + sign * nu * np.sin(t)[:, None]
    need = 2.0 * np.sin(np.maximum(t - search.slack, 0.0) / 2.0)
    ix = search.index
    if not search.refine:
        return _bounded(ix, y, need) >= need
    # the true chord is within the cover of the nearest cloud chord
    c = _bounded(ix, y, need + ix.cover_chord)
    ok = c >= need
    unsure = ok & np.isfinite(c)
    if unsure.any():
        d = ix.distance(y[unsure], cloud_chord=c[unsure])
        ok[np.nonzero(unsure)[0]] = d >= t[unsure] - search.slack
    return ok


def _bounded(ix, y, bound):
    """Nearest cloud chords with a per-row upper bound; rows are grouped by bound."""
    out = np.full(len(y), np.inf)
    order = np.argsort(bound)
    # a handful of shared bounds keeps the tree queries vectorised
    for grp in np.array_split(order, min(len(order), 16) or 1):
        if len(grp):
            d = ix.cloud_within(y[grp], float(bound[grp].max()))
            out[grp] = np.where(d < bound[grp], d, np.inf)
    return out


def _largest_realizing(search, phi, nu, sign):
    n_steps = int(np.floor(np.pi / search.dt))
    lo = np.zeros(len(phi), dtype=int)  # known to pass
    hi = np.full(len(phi), n_steps + 1)  # known to fail (or beyond range)
    while True:
        active = hi - lo > 1
        if not active.any():
            break
        ids = np.nonzero(active)[0]
        mid = (lo[ids] + hi[ids]) // 2
        ok = _passes(search, phi[ids], nu[ids], mid * search.dt, sign)
        lo[ids[ok]] = mid[ok]
        hi[ids[~ok]] = mid[~ok]
    return lo * search.dt


def theta_pm(s, index=None, samples=None, dt=DEFAULT_DT, slack=None, refine=True):
    """Distance-realizing extents ``(theta_minus, theta_plus)`` of the normal geodesics.

    ``samples`` selects frame indices (all by default).  The search assumes
    that once a geodesic stops realizing the distance it never does again,
    and bisects the grid ``k dt`` for the last realizing step.
    """
    fs = frames_of(s)
    search = _make_search(s, index, dt, slack, refine)
    idx = np.arange(len(fs)) if samples is None else np.atleast_1d(samples)
    phi, nu = fs.phi[idx], fs.nu[idx]
    plus = _largest_realizing(search, phi, nu, +1.0)
    minus = -_largest_realizing(search, phi, nu, -1.0)
    return minus, plus, search


def fill_theta_pm(s, profiles, **kw):
    minus, plus, search = theta_pm(s, **kw)
    profiles.theta_minus = minus
    profiles.theta_plus = plus
    profiles.search = search
    return profiles


def nesting_tolerance(search):
    return search.dt + search.index.covering_radius


def nesting_check(s, index=None, samples=None, dt=DEFAULT_DT, slack=None, refine=True):
    """Per-sample ``(minus_ok, plus_ok)`` for ``theta_1 - tol <= theta_minus`` and
    ``theta_plus <= theta_2 + tol``.

    A geodesic that stops realizing the distance never does so again, so
    each bound holds exactly when the first grid step beyond it fails.
    That takes one test per side instead of a full bisection.
    """
    fs = frames_of(s)
    pr = angle_profiles(fs)
    search = _make_search(s, index, dt, slack, refine)
    tol = nesting_tolerance(search)
    idx = np.arange(len(fs)) if samples is None else np.atleast_1d(samples)
    phi, nu = fs.phi[idx], fs.nu[idx]
    n_steps = int(np.floor(np.pi / dt))
    out = []
    for sign, bound in ((-1.0, -pr.theta_1[idx]), (+1.0, pr.theta_2[idx])):
        k = np.floor((bound + tol) / dt).astype(int) + 1
        ok = k > n_steps
        test = ~ok
        if test.any():
            ok[test] = ~_passes(search, phi[test], nu[test], k[test] * dt, sign)
        out.append(ok)
    return out[0], out[1], search


@dataclass
class MinimizerEstimates:
    delta: float
    mu_sigma_pi: float
    int_pi_minus_theta_hat: float
    int_interval_gap: float
    best_point: int

    def to_dict(self):
        return dict(self.__dict__)


def minimizer_estimates(s, profiles=None, n_samples=None, seed=0, **kw):
    """Raw quantities that measure how far ``s`` is from a minimizer.

    The integrals over ``Sigma_pi`` need ``theta_pm`` there.  With
    ``n_samples`` set, they are estimated from that many samples drawn with
    probability proportional to ``mu`` (seeded, so repeatable).
    """
    pr = profiles or angle_profiles(s)
    mu = pr.frames.mu
    pi_idx = np.nonzero(pr.sigma_pi)[0]
    mass = float(np.sum(mu[pi_idx]))
    if not len(pi_idx):
        idx, w = pi_idx, mu[pi_idx]
    elif n_samples is None or n_samples >= len(pi_idx):
        idx, w = pi_idx, mu[pi_idx]
    else:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(pi_idx, size=n_samples, p=mu[pi_idx] / mass))
        w = np.full(n_samples, mass / n_samples)
    if len(idx):
        minus, plus, _ = theta_pm(s, samples=idx, **kw)
        gap = np.abs(minus - pr.theta_1[idx]) + np.abs(pr.theta_2[idx] - plus)
        best = int(idx[np.argmax(plus - minus)])
    else:
        gap, best = np.zeros(0), -1
    return MinimizerEstimates(
        delta=area_gauss(s) - 4 * np.pi * (1 + s.genus),
        mu_sigma_pi=mass,
        int_pi_minus_theta_hat=float(np.sum(((np.pi - pr.theta_hat) * mu)[pi_idx])),
        int_interval_gap=float(np.sum(gap * w)),
        best_point=best,
    )


def lambda_constants(n=10_000):
    """Measured positive constants of the lambda inequalities on a grid."""
    t = np.linspace(np.pi / n, np.pi, n)
    l0, lp = lambda_functions(t)
    inner = t[(t > 1e-3) & (t < np.pi - 1e-3)]
    a0, ap = lambda_functions(inner)
    return {
        "gap_over_min": float(np.min((np.pi - a0 - ap) / np.minimum(a0, ap))),
        "lambda0_over_t2": float(np.min(l0 / t**2)),
    }
