"""Nearest-point queries against a charted surface in S^3.

Every chart keeps a grid of surface points in its own k-d tree, together
with a bounding ball and the chart's covering radius.  A cloud query
returns the chordal distance to the nearest grid point, which overestimates
the true distance by at most the covering radius.  A refined query projects
onto every chart that could hold the nearest point, starting from that
chart's nearest grid point.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.spatial import cKDTree

from .surface import frames_of

# parallel k-d tree queries; results do not depend on the worker count
WORKERS = -1


def chord_to_geodesic(c):
    return 2.0 * np.arcsin(np.clip(np.asarray(c) / 2.0, 0.0, 1.0))


class _ChartCloud:
    """Grid of one chart in the parameters of its ``fn`` (orientation ignored)."""

    def __init__(self, ch, density):
        ch = replace(ch, flip=False)
        self.chart = ch
        self.domain = ch.domain
        u0, u1, v0, v1 = ch.domain
        nu = max(8, int(np.ceil(density * ch.resolution[0])) + 1)
        nv = max(8, int(np.ceil(density * ch.resolution[1])) + 1)
        U, V = np.meshgrid(np.linspace(u0, u1, nu), np.linspace(v0, v1, nv), indexing="ij")
        P, Pu, Pv, *_ = ch.evaluate(U.ravel(), V.ravel())
        P = P.reshape(nu, nv, 4)
        gram = (np.sum(Pu * Pu, -1) * np.sum(Pv * Pv, -1) - np.sum(Pu * Pv, -1) ** 2).reshape(nu, nv)
        # degenerate parameter points (chart poles) make poor projection seeds
        live = (ch.weights_at(U, V) > 0) & (gram > 1e-14 * gram.max())
        d1 = np.linalg.norm(P[1:, 1:] - P[:-1, :-1], axis=-1)
        d2 = np.linalg.norm(P[1:, :-1] - P[:-1, 1:], axis=-1)
        cell_live = live[1:, 1:] | live[:-1, :-1] | live[1:, :-1] | live[:-1, 1:]
        # half of the longer cell diagonal bounds the distance to a corner
        self.cover = 0.5 * float(np.max(np.maximum(d1, d2)[cell_live])) if cell_live.any() else 0.0
        self.points = P[live]
        self.u, self.v = U[live], V[live]
        scale = float(np.max(np.abs(P)))
        self.periodic_u = abs(u1 - u0 - 2 * np.pi) < 1e-12 and np.max(np.abs(P[0] - P[-1])) < 1e-12 * scale
        self.periodic = abs(v1 - v0 - 2 * np.pi) < 1e-12 and np.max(np.abs(P[:, 0] - P[:, -1])) < 1e-12 * scale
        if len(self.points):
            self.center = self.points.mean(axis=0)
            self.radius = float(np.max(np.linalg.norm(self.points - self.center, axis=-1))) + self.cover
            self.tree = cKDTree(self.points)


class SurfaceIndex:
    """Per-chart grids of ``density`` times the quadrature resolution."""

    def __init__(self, s, density=1.0, newton_steps=16, approx=0.1):
        self.surface = s
        self.approx = approx
        self.newton_steps = newton_steps
        clouds = [_ChartCloud(ch, density) for ch in s.charts]
        self.charts = [i for i, c in enumerate(clouds) if len(c.points)]
        self.clouds = [clouds[i] for i in self.charts]
        self.points = np.concatenate([c.points for c in self.clouds])
        self.covering_radius = chord_to_geodesic(max(c.cover for c in self.clouds))
        self.tree = cKDTree(self.points)
        self._centers = np.array([c.center for c in self.clouds])
        self._radii = np.array([c.radius for c in self.clouds])
        self._covers = np.array([c.cover for c in self.clouds])
        self.cover_chord = float(self._covers.max())
        self._refined_error = None

    def __len__(self):
        return len(self.points)

    def cloud_distance(self, y):
        """Geodesic distance to an approximately nearest cloud point.

        The chord returned is at most ``1 + approx`` times the exact nearest
        chord; approximate search avoids the worst case of a query that is
        nearly equidistant from the whole cloud.
        """
        d, _ = self.tree.query(np.atleast_2d(y), k=1, eps=self.approx, workers=WORKERS)
        return chord_to_geodesic(d)

    def cloud_lower_bound(self, d_cloud):
        """Lower bound for the true distance given a :meth:`cloud_distance` value."""
        chord = 2.0 * np.sin(np.asarray(d_cloud) / 2.0) / (1.0 + self.approx)
        return chord_to_geodesic(chord) - self.covering_radius

    def cloud_within(self, y, chord):
        """Exact chordal distance to the nearest cloud point, or ``inf`` beyond ``chord``.

        A bounded query prunes far more of the tree than an open one.
        """
        d, _ = self.tree.query(np.atleast_2d(y), k=1, distance_upper_bound=chord, workers=WORKERS)
        return d

    def distance(self, y, cloud_chord=None):
        """Refined geodesic distance from each row of ``y`` to the surface.

        ``cloud_chord`` may carry already known exact nearest cloud chords.
        """
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if cloud_chord is None:
            best, _ = self.tree.query(y, k=1, workers=WORKERS)
        else:
            best = np.array(cloud_chord, dtype=float)
        # a chart can only hold the nearest point if its ball comes that close
        gap = np.linalg.norm(y[:, None, :] - self._centers[None], axis=-1) - self._radii[None]
        reach = gap <= best[:, None]
        rows_, charts_, chords_, seeds_ = [], [], [], []
        for j in np.nonzero(reach.any(axis=0))[0]:
            rows = np.nonzero(reach[:, j])[0]
            cl = self.clouds[j]
            c, seed = cl.tree.query(y[rows], k=1, distance_upper_bound=best[rows].max() + self._covers[j])
            keep = (seed < len(cl.points)) & (c - self._covers[j] <= best[rows])
            rows_.append(rows[keep])
            charts_.append(np.full(keep.sum(), j))
            chords_.append(c[keep])
            seeds_.append(seed[keep])
        if not rows_:
            return chord_to_geodesic(best)
        rows, charts, chords, seeds = (np.concatenate(a) for a in (rows_, charts_, chords_, seeds_))
        # the chart holding each row's nearest seed usually settles the
        # distance, after which most other candidates drop out
        order = np.lexsort((chords, rows))
        first = np.zeros(len(rows), dtype=bool)
        first[order[np.r_[True, rows[order][1:] != rows[order][:-1]]]] = True
        self._project_jobs(y, best, rows[first], charts[first], seeds[first])
        rest = ~first & (chords - self._covers[charts] <= best[rows])
        self._project_jobs(y, best, rows[rest], charts[rest], seeds[rest])
        return chord_to_geodesic(best)

    def _project_jobs(self, y, best, rows, charts, seeds):
        """Project each (row, chart, seed) job and lower ``best`` in place."""
        jobs = {}
        for j in np.unique(charts):
            m = charts == j
            jobs.setdefault(self._group_key(self.clouds[j].chart), []).append((j, rows[m], seeds[m]))
        for parts in jobs.values():
            rr = np.concatenate([r for _, r, _ in parts])
            np.minimum.at(best, rr, self._project(parts, y[rr]))

    @staticmethod
    def _group_key(ch):
        # charts sharing ``fn`` are projected in one batch
        return (id(ch.fn), ch.derivative_mode, ch.fd_step)

    def _project(self, parts, target):
        """Chordal distances after projection, batched over charts sharing ``fn``.

        Free Gauss-Newton steps come first, keeping the best iterate since
        they may overshoot.  Gauss-Newton only converges linearly when the
        target is near a focal point of the surface, so damped Newton steps
        with the full Hessian of the squared distance finish the job.
        """
        ch = self.clouds[parts[0][0]].chart
        cat = lambda f: np.concatenate([f(self.clouds[j], sd) for j, _, sd in parts])
        u = cat(lambda cl, sd: cl.u[sd])
        v = cat(lambda cl, sd: cl.v[sd])
        u0, u1, v0, v1 = (cat(lambda cl, sd, k=k: np.full(len(sd), cl.domain[k])) for k in range(4))
        periodic = cat(lambda cl, sd: np.full(len(sd), cl.periodic))
        periodic_u = cat(lambda cl, sd: np.full(len(sd), cl.periodic_u))
        n = len(target)

        def wrap(x, lo, hi, per):
            return np.where(per, lo + np.mod(x - lo, hi - lo), np.clip(x, lo, hi))

        def advance(act, du, dv):
            return (wrap(u[act] + du, u0[act], u1[act], periodic_u[act]),
                    wrap(v[act] + dv, v0[act], v1[act], periodic[act]))

        def solve(a11, a12, a22, b1, b2):
            det = a11 * a22 - a12 * a12
            det = np.where(np.abs(det) > 1e-30 * np.abs(a11 * a22), det, np.inf)
            return (a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det

        p, pu, pv = ch.evaluate_first(u, v)
        start = np.linalg.norm(target - p, axis=-1)
        bu, bv, best = u.copy(), v.copy(), start.copy()
        act = np.arange(n)
        prev = np.full(n, np.inf)
        done = np.zeros(n, dtype=bool)
        for _ in range(self.newton_steps):
            if not len(act):
                break
            qu, qv = pu[act], pv[act]
            r = target[act] - p[act]
            du, dv = solve(np.sum(qu * qu, -1) + 1e-300, np.sum(qu * qv, -1), np.sum(qv * qv, -1) + 1e-300,
                           np.sum(qu * r, -1), np.sum(qv * r, -1))
            un, vn = advance(act, du, dv)
            pn, pun, pvn = ch.evaluate_first(un, vn)
            trial = np.linalg.norm(target[act] - pn, axis=-1)
            better = trial < best[act]
            bu[act[better]], bv[act[better]], best[act[better]] = un[better], vn[better], trial[better]
            # a short step that also shrank fast means converged; slow linear
            # convergence near focal points is left to the Newton phase
            moved = np.linalg.norm(pn - p[act], axis=-1)
            small = (moved <= 1e-14 + 1e-8 * trial) & (moved <= 0.5 * prev[act])
            prev[act] = moved
            done[act[small | (trial == 0)]] = True
            u[act], v[act], p[act], pu[act], pv[act] = un, vn, pn, pun, pvn
            act = act[~small & (trial > 0)]

        u, v, cur = bu.copy(), bv.copy(), best.copy()
        lam = np.full(n, 1e-6)
        act = np.nonzero(~done & (best > 0))[0]
        for _ in range(4 * self.newton_steps):
            if not len(act):
                break
            p, qu, qv, quu, quv, qvv = ch.evaluate(u[act], v[act])
            r = target[act] - p
            h11 = np.sum(qu * qu, -1) - np.sum(r * quu, -1)
            h12 = np.sum(qu * qv, -1) - np.sum(r * quv, -1)
            h22 = np.sum(qv * qv, -1) - np.sum(r * qvv, -1)
            g11, g12, g22 = np.sum(qu * qu, -1), np.sum(qu * qv, -1), np.sum(qv * qv, -1)
            la = lam[act]
            shift = la * 0.5 * (g11 + g22)
            a11, a22 = h11 + shift, h22 + shift
            b1, b2 = np.sum(qu * r, -1), np.sum(qv * r, -1)
            du, dv = solve(a11, h12, a22, b1, b2)
            # where the damped Hessian is indefinite, take a Marquardt step instead
            pd = (a11 > 0) & (a11 * a22 - h12 * h12 > 0)
            mu_, mv = solve(g11 * (1 + la) + 1e-300, g12, g22 * (1 + la) + 1e-300, b1, b2)
            du, dv = np.where(pd, du, mu_), np.where(pd, dv, mv)
            un, vn = advance(act, du, dv)
            pn, _, _ = ch.evaluate_first(un, vn)
            trial = np.linalg.norm(target[act] - pn, axis=-1)
            take = trial < cur[act]
            small = np.linalg.norm(pn - p, axis=-1) <= 1e-14 + 1e-8 * trial
            it = act[take]
            u[it], v[it], cur[it] = un[take], vn[take], trial[take]
            lam[act] = np.where(take, np.maximum(lam[act] * 0.1, 1e-12), lam[act] * 10.0)
            act = act[~small & (lam[act] < 1e8) & (cur[act] > 0)]
        bu, bv, best = u, v, cur
        cur = best
        # a projected point outside the chart's support is not on the surface
        lo = 0
        for j, rows, _ in parts:
            sl = slice(lo, lo + len(rows))
            lo += len(rows)
            off = (self.clouds[j].chart.weights_at(bu[sl], bv[sl]) <= 0) & (cur[sl] < start[sl])
            cur[sl] = np.where(off, start[sl], cur[sl])
        return cur

    def refined_error(self, n=256, seed=0):
        """Largest refined distance from random on-surface points (ideally 0)."""
        if self._refined_error is None:
            fs = frames_of(self.surface)
            rng = np.random.default_rng(seed)
            pick = rng.choice(len(fs), size=min(n, len(fs)), replace=False)
            self._refined_error = float(np.max(self.distance(fs.phi[pick])))
        return self._refined_error
