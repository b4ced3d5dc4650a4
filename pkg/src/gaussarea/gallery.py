"""Surface families: round spheres, product tori, transplants and handles."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import HandleOverlap, ImmersionLost, OutOfRange, SeamMismatch
from .quat_gr import orthonormal_complement
from .surface import BASE_RESOLUTION, Chart, ChartedSurface, cross4


def _lincomb(coeffs, vectors):
    """Jet-valued ``sum c_k * vec_k`` for constant vectors ``vec_k``."""
    out = None
    for c, vec in zip(coeffs, vectors):
        term = jets.outer(jets.as_jet(c), vec)
        out = term if out is None else out + term
    return out


def _oriented(chart, wanted_normal):
    """Flip ``chart`` if its induced normal disagrees with ``wanted_normal``.

    ``wanted_normal(u, v)`` returns an R^4 vector at the chart centre.
    """
    u0, u1, v0, v1 = chart.domain
    uc, vc = 0.5 * (u0 + u1) + 0.01 * (u1 - u0), 0.5 * (v0 + v1) + 0.01 * (v1 - v0)
    p, pu, pv, *_ = chart.evaluate(np.array([uc]), np.array([vc]))
    nu = cross4(p, pu, pv)[0]
    if np.dot(nu, wanted_normal(uc, vc)) < 0:
        return replace(chart, flip=not chart.flip)
    return chart


def round_sphere(p=(0.0, 0.0, 0.0, 1.0), r=np.pi / 2, resolution=BASE_RESOLUTION):
    """Geodesic sphere of radius ``r`` about ``p`` with normal pointing away from ``p``.

    Two polar charts cover the hemispheres on either side of the equator
    relative to the third complementary axis.
    """
    if not 0.0 < r < np.pi:
        raise OutOfRange(f"sphere radius {r} outside (0, pi)")
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-9:
        raise OutOfRange("sphere centre must be a unit vector")
    c1, c2, c3 = orthonormal_complement(p)
    cr, sr = np.cos(r), np.sin(r)

    def fn(th, ps):
        st, ct = jets.sin(th), jets.cos(th)
        return _lincomb([cr + 0.0 * th, sr * st * jets.cos(ps), sr * st * jets.sin(ps), sr * ct], [p, c1, c2, c3])

    def away(th, ps):
        e = np.sin(th) * (np.cos(ps) * c1 + np.sin(ps) * c2) + np.cos(th) * c3
        return -sr * p + cr * e

    res = (resolution, resolution)
    charts = [
        _oriented(Chart(fn, (0.0, np.pi / 2, 0.0, 2 * np.pi), res, name="north"), away),
        _oriented(Chart(fn, (np.pi / 2, np.pi, 0.0, 2 * np.pi), res, name="south"), away),
    ]
    return ChartedSurface(charts, 0, f"sphere:r={r:g}", {"center": p, "radius": r})


def product_torus(rho, resolution=BASE_RESOLUTION):
    """``S^1(rho) x S^1(sqrt(1 - rho^2))`` with ``kappa1 = sigma / rho``."""
    if not 0.0 < rho < 1.0:
        raise OutOfRange(f"torus radius {rho} outside (0, 1)")
    sigma = np.sqrt(1.0 - rho * rho)

    def fn(u, v):
        return jets.stack([rho * jets.cos(u), rho * jets.sin(u), sigma * jets.cos(v), sigma * jets.sin(v)])

    def wanted(u, v):
        return np.array([-sigma * np.cos(u), -sigma * np.sin(u), rho * np.cos(v), rho * np.sin(v)])

    chart = _oriented(Chart(fn, (0.0, 2 * np.pi, 0.0, 2 * np.pi), (resolution, resolution), name="torus"), wanted)
    return ChartedSurface([chart], 1, f"torus:rho={rho:g}", {"rho": rho})


def perturbed_sphere(r=1.0, amplitude=0.05, seed=0, resolution=BASE_RESOLUTION):
    """Radial graph ``r + amplitude * eta`` over a great-circle-free sphere.

    ``eta`` is a random quadratic form in the ambient coordinates of the unit
    normal direction, so it is smooth across the polar chart seams.
    """
    if not 0.0 < r < np.pi:
        raise OutOfRange(f"sphere radius {r} outside (0, pi)")
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    A = 0.5 * (A + A.T)
    p = np.array([0.0, 0.0, 0.0, 1.0])
    c1, c2, c3 = orthonormal_complement(p)

    def fn(th, ps):
        st = jets.sin(th)
        e = [st * jets.cos(ps), st * jets.sin(ps), jets.cos(th)]
        eta = sum(A[i, j] * e[i] * e[j] for i in range(3) for j in range(3))
        rad = eta * amplitude + r
        sr = jets.sin(rad)
        return _lincomb([jets.cos(rad), sr * e[0], sr * e[1], sr * e[2]], [p, c1, c2, c3])

    def away(th, ps):
        e = np.sin(th) * (np.cos(ps) * c1 + np.sin(ps) * c2) + np.cos(th) * c3
        return -np.sin(r) * p + np.cos(r) * e

    res = (resolution, resolution)
    charts = [
        _oriented(Chart(fn, (0.0, np.pi / 2, 0.0, 2 * np.pi), res, name="north"), away),
        _oriented(Chart(fn, (np.pi / 2, np.pi, 0.0, 2 * np.pi), res, name="south"), away),
    ]
    return ChartedSurface(charts, 0, f"perturbed:r={r:g}:a={amplitude:g}:seed={seed}")


# --------------------------------------------------------------------------
# surfaces in R^3 and their transplants
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class R3Chart:
    """Chart into R^3 whose ``d_u x d_v`` orientation gives the intended normal."""

    fn: Callable
    domain: tuple
    resolution: tuple = (BASE_RESOLUTION, BASE_RESOLUTION)
    pou: Optional[Callable] = None
    name: str = ""
    part: str = ""
    flip: bool = False

    def as_chart(self):
        return Chart(self.fn, self.domain, self.resolution, pou=self.pou, flip=self.flip, name=self.name)


@dataclass(frozen=True)
class R3Surface:
    charts: tuple
    genus: int
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)


def r3_frames(s):
    """Quadrature data for an R^3 surface: normal, Gauss curvature, area element."""
    out = []
    for ch in s.charts:
        c = ch.as_chart()
        U, V, W = c.nodes()
        w = c.weights_at(U, V)
        keep = w > 0
        U, V, W, w = U[keep], V[keep], W[keep], w[keep]
        x, xu, xv, xuu, xuv, xvv = c.evaluate(U, V)
        n = np.cross(xu, xv)
        jac = np.linalg.norm(n, axis=-1)
        n = n / jac[:, None]
        E, F, G = (np.sum(a * b, -1) for a, b in ((xu, xu), (xu, xv), (xv, xv)))
        e, f, g = (np.sum(a * n, -1) for a in (xuu, xuv, xvv))
        K = (e * g - f * f) / (E * G - F * F)
        out.append(dict(x=x, normal=n, K=K, dA=W * w * jac, part=ch.part))
    return out


def inverse_stereographic(x):
    """``Pi^{-1}(x) = (2x, |x|^2 - 1) / (|x|^2 + 1)``; the origin maps to ``-e_4``."""
    n2 = jets.dot(x, x) if isinstance(x, jets.Jet) else np.sum(x * x, -1)
    inv = 1.0 / (n2 + 1.0)
    if isinstance(x, jets.Jet):
        return jets.stack([2.0 * x[..., 0] * inv, 2.0 * x[..., 1] * inv, 2.0 * x[..., 2] * inv, (n2 - 1.0) * inv])
    return np.concatenate([2 * x * inv[..., None], ((n2 - 1) * inv)[..., None]], axis=-1)


def stereographic(y):
    """Projection from ``e_4``, inverse of :func:`inverse_stereographic`."""
    y = np.asarray(y, dtype=float)
    return y[..., :3] / (1.0 - y[..., 3:4])


def push_vector(F, x, w):
    """Differential of ``F`` at ``x`` applied to ``w`` (both plain arrays)."""
    t, _ = jets.Jet.seeds(np.zeros(np.shape(x)[:-1]), np.zeros(np.shape(x)[:-1]))
    arg = jets.Jet(x) + jets.outer(t, np.zeros(3)) + jets.Jet(np.zeros_like(x), du=np.asarray(w, dtype=float))
    return F(arg).full().du


def _orient_by_pushforward(chart, r3_chart, F):
    """Flip ``chart`` so its normal matches the pushed-forward R^3 normal."""
    sign = -1.0 if r3_chart.flip else 1.0

    # ``chart`` is unflipped here, so its parameters are those of ``fn``
    def wanted(u, v):
        x = r3_chart.fn(*jets.Jet.seeds(np.array([u]), np.array([v]))).full()
        return push_vector(F, x.val, sign * np.cross(x.du, x.dv))[0]

    return _oriented(replace(chart, flip=False), wanted)


def _transplant_chart(ch, F, cache=None):
    """``F`` applied to an R^3 chart; charts sharing ``fn`` share the composite."""
    cache = {} if cache is None else cache
    key = id(ch.fn)
    if key not in cache:

        def fn(U, V, f=ch.fn):
            return F(f(U, V))

        cache[key] = (fn, ch.fn)
    chart = Chart(cache[key][0], ch.domain, ch.resolution, pou=ch.pou, name=ch.name)
    return _orient_by_pushforward(chart, ch, F)


def stereographic_transplant(s0, scale):
    """``Pi^{-1}(scale * x)`` applied to every chart of an R^3 surface."""
    if not scale > 0:
        raise OutOfRange("scale must be positive")

    def F(x):
        return inverse_stereographic(x * scale)

    cache = {}
    charts = [_transplant_chart(ch, F, cache) for ch in s0.charts]
    out = ChartedSurface(charts, s0.genus, f"transplant:{s0.label}:scale={scale:g}", {"scale": scale})
    for c in out.charts:
        _check_immersion(c)
    return out


def _check_immersion(chart):
    U, V, _ = chart.nodes()
    p, pu, pv, *_ = chart.evaluate(U, V)
    gram = np.sum(pu * pu, -1) * np.sum(pv * pv, -1) - np.sum(pu * pv, -1) ** 2
    if np.sqrt(max(gram.min(), 0.0)) < 1e-8 * np.sqrt(gram.max()):
        raise ImmersionLost(f"chart {chart.name}: Jacobian collapsed")


def ellipsoid(a=1.0, b=1.0, c=1.0, resolution=BASE_RESOLUTION):
    """Triaxial ellipsoid with outward normal, two polar charts."""

    def fn(th, ps):
        st = jets.sin(th)
        return jets.stack([a * st * jets.cos(ps), b * st * jets.sin(ps), c * jets.cos(th)])

    res = (resolution, resolution)
    charts = (
        R3Chart(fn, (0.0, np.pi / 2, 0.0, 2 * np.pi), res, name="north"),
        R3Chart(fn, (np.pi / 2, np.pi, 0.0, 2 * np.pi), res, name="south"),
    )
    label = "sphere" if a == b == c == 1.0 else f"ellipsoid:{a:g},{b:g},{c:g}"
    return R3Surface(charts, 0, label)


TURN_GRADING = (0.1, 0.01, 1e-3)


def figure8_torus(R0=1.0, width=0.3, length=4.0, pieces=8, resolution=BASE_RESOLUTION):
    """Revolution about the z-axis of the thin figure-8 ``(R0 + w sin 2s / 2, L sin s)``.

    The profile tangent never points in the ``+r`` direction, so the normal
    component along ``e_z`` never exceeds roughly ``w / L``: the normal image
    hugs the lower hemisphere.  The profile is
    cut into ``pieces`` charts whose ends sit at the sharp turning points,
    plus graded panels next to them.
    """
    if not R0 > width / 2:
        raise OutOfRange("profile must stay away from the axis")

    def fn(s, v):
        r = R0 + 0.5 * width * jets.sin(2.0 * s)
        return jets.stack([r * jets.cos(v), r * jets.sin(v), length * jets.sin(s)])

    step = 2 * np.pi / pieces
    cuts = set(np.round(np.arange(pieces + 1) * step, 15))
    # at the turning points the parallel curvature changes sign; a transplant
    # turns that zero into a near kink, so panels shrink geometrically there
    for turn in (np.pi / 2, 3 * np.pi / 2):
        cuts |= {turn + sgn * d for sgn in (-1, 1) for d in TURN_GRADING}
    cuts = sorted(c for c in cuts if 0.0 <= c <= 2 * np.pi)
    v_res = max(8, resolution // 4)
    charts = tuple(
        R3Chart(fn, (a, b, 0.0, 2 * np.pi), (resolution if b - a > 0.1 else max(8, resolution // 2), v_res),
                name=f"fig8-{k}")
        for k, (a, b) in enumerate(zip(cuts[:-1], cuts[1:]))
    )
    return R3Surface(charts, 1, "figure8", {"R0": R0, "width": width, "length": length})


# --------------------------------------------------------------------------
# handles
# --------------------------------------------------------------------------
def _smoothstep(t):
    """Quintic ``6t^5 - 15t^4 + 10t^3`` clamped to [0, 1]; works on jets and arrays."""
    if isinstance(t, jets.Jet):
        inside = (t.val > 0) & (t.val < 1)
        poly = jets.poly(t, [0, 0, 0, 10, -15, 6])
        return jets.where(inside, poly, jets.Jet(np.where(t.val >= 1, 1.0, 0.0)))
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t * t)


# antiderivative of the quintic step, vanishing at 0
_STEP_INT = [0, 0, 0, 0, 2.5, -3.0, 1.0]


def _jet_abs(a):
    return jets.where(a.val >= 0, a, -a)


@dataclass(frozen=True)
class HandleProfile:
    """Bump profile ``h f`` and the neck dimensions derived from its height.

    ``f`` is 1 on (0, 1), ``(7 - 2r) / 4`` on (2, 3) and 0 beyond 4, with
    quintic slope blends in between so it is C^2, concave then convex.
    """

    h: float
    smoothing_width: float = 0.1
    height: Optional[float] = None

    R2 = 7.0
    HOLE_CENTER = 2.5
    HOLE_INNER = 0.41
    HOLE_OUTER = 0.45

    def __post_init__(self):
        if not self.h > 0:
            raise OutOfRange("handle height must be positive")
        if not 0 < self.smoothing_width < 0.25:
            raise OutOfRange("smoothing_width must lie in (0, 1/4)")

    @property
    def hp(self):
        return self.h if self.height is None else self.height

    @property
    def eps(self):
        return self.hp / 16

    @property
    def arc(self):
        return self.hp / 16

    @property
    def ring(self):
        return 0.2 * self.hp

    @property
    def axis_z(self):
        return 0.5 * self.hp

    def f(self, r):
        """The profile on jets or arrays."""
        r = jets.as_jet(r)
        one = jets.Jet(np.ones_like(r.val))
        p1 = 1.0 - 0.5 * jets.poly(r - 1.0, _STEP_INT)
        p2 = (7.0 - 2.0 * r) * 0.25
        t3 = r - 3.0
        p3 = 0.25 - 0.5 * (t3 - jets.poly(t3, _STEP_INT))
        x = r.val
        out = jets.where(x < 1, one, jets.where(x < 2, p1, jets.where(x < 3, p2, jets.where(x < 4, p3, 0.0 * one))))
        return out

    def stadium_offset(self, ay):
        """Smoothed ``max(|y| - 1, 0)`` from the absolute value ``ay``."""
        sw = self.smoothing_width
        tau = (ay - (1.0 - sw)) * (1.0 / (2 * sw))
        blend = jets.poly(tau, _STEP_INT) * (2 * sw)
        x = ay.val
        zero = 0.0 * ay
        return jets.where(x <= 1 - sw, zero, jets.where(x < 1 + sw, blend, ay - 1.0))

    def g(self, X, Y):
        """Height ``hp f(sqrt(X^2 + M(|Y|)^2))`` of the bump graph."""
        M = self.stadium_offset(_jet_abs(Y))
        r2 = X * X + M * M
        big = r2.val > 0.5
        safe = jets.where(big, r2, jets.Jet(np.ones_like(r2.val)))
        fr = self.f(jets.sqrt(safe))
        return jets.where(big, fr, jets.Jet(np.ones_like(r2.val))) * self.hp

    def hole_weight(self, X, Y):
        """1 near the two hole centres, quintic fall-off to 0 at the outer radius."""
        out = 0.0
        for cx in (-self.HOLE_CENTER, self.HOLE_CENTER):
            d = np.hypot(np.asarray(X) - cx, np.asarray(Y))
            out = out + 1.0 - _smoothstep((d - self.HOLE_INNER) / (self.HOLE_OUTER - self.HOLE_INNER))
        return out

    @staticmethod
    def collar_weight(rho, inner, outer):
        """1 inside ``inner``, falling to 0 at ``outer``."""
        return 1.0 - _smoothstep((np.asarray(rho) - inner) / (outer - inner))


def _orient_r3(chart, wanted):
    """Flip an R^3 chart if its ``x_u x x_v`` disagrees with ``wanted``."""
    u0, u1, v0, v1 = chart.domain
    uc, vc = 0.5 * (u0 + u1) + 0.013 * (u1 - u0), 0.5 * (v0 + v1) + 0.011 * (v1 - v0)
    x = chart.fn(*jets.Jet.seeds(np.array([uc]), np.array([vc]))).full()
    n = np.cross(x.du, x.dv)[0]
    return replace(chart, flip=bool(np.dot(n, wanted(x.val[0], uc, vc)) < 0))


def _tube_point(prof, side, xt, rho, psi):
    """Point of the neck: revolution about a horizontal axis, then a shear onto the ramp."""
    z = prof.axis_z + rho * jets.sin(psi)
    y = rho * jets.cos(psi)
    x = xt - z * (2.0 / prof.hp)
    return jets.stack([x * side, y, z])


def _tube_normal(prof, side, n_axial, n_radial, psi):
    # normals transform by the inverse transpose of the shear
    n = np.array([n_axial, n_radial * np.cos(psi), n_radial * np.sin(psi) + 2.0 * n_axial / prof.hp])
    n[0] *= side
    return n


def _raw_handle_charts(prof, res):
    """Unoriented charts of the handle block paired with their wanted normals."""
    R2 = prof.R2
    two_pi = 2 * np.pi
    coarse = max(8, res // 4)
    pn = max(6, res // 8)

    def arc_panels(arc):
        # the neck curvature sits in a band of width ~hp next to the cylinder
        # and peaks sharply near the top of the tube
        quarters = np.linspace(0.0, two_pi, 5)
        seeds = [(a0, a1, q0, q1) for a0, a1 in _graded_panels(np.pi / 2, np.pi / 2, prof.hp / 2)
                 for q0, q1 in zip(quarters[:-1], quarters[1:])]
        return _adaptive_panels(arc, seeds, tol=1e-9 * 4 * np.pi)

    def polar(rho, psi):
        X, Y = rho * jets.cos(psi), rho * jets.sin(psi)
        return jets.stack([X, Y, prof.g(X, Y)])

    def polar_pou(rho, psi):
        return 1.0 - prof.hole_weight(rho * np.cos(psi), rho * np.sin(psi))

    def up(*_):
        return np.array([0.0, 0.0, 1.0])

    out = [(R3Chart(polar, (0.0, R2, 0.0, two_pi), (res, 2 * res), pou=polar_pou, name="graph", part="graph"), up)]

    eps, c, RB, hp = prof.eps, prof.arc, prof.ring, prof.hp
    cx, outer = prof.HOLE_CENTER, prof.HOLE_OUTER
    for side in (1.0, -1.0):
        tag = "R" if side > 0 else "L"

        def ellipse_xy(sg, psi, trig, side=side):
            cos_, sin_ = trig
            A = 0.4 + sg * (outer - 0.4)
            B = RB + sg * (outer - RB)
            return (cx + A * cos_(psi)) * side, B * sin_(psi)

        def annulus(sg, psi, f=ellipse_xy):
            X, Y = f(sg, psi, (jets.cos, jets.sin))
            return jets.stack([X, Y, prof.g(X, Y)])

        def annulus_pou(sg, psi, f=ellipse_xy):
            return prof.hole_weight(*f(sg, psi, (np.cos, np.sin)))

        def ring(rho, psi, side=side):
            return _tube_point(prof, side, 3.5 + 0.0 * rho, rho, psi)

        def arc(al, psi, side=side):
            xt = 3.5 - c * (1.0 - jets.cos(al))
            return _tube_point(prof, side, xt, eps + c - c * jets.sin(al), psi)

        def cyl(s, psi, side=side):
            x0 = 1.0 + jets.sin(psi) * (2.0 * eps / hp)
            return _tube_point(prof, side, x0 + s * ((3.5 - c) - x0), eps + 0.0 * s, psi)

        def n_ring(x, u, v, side=side):
            return _tube_normal(prof, side, 1.0, 0.0, v)

        def n_arc(x, u, v, side=side):
            return _tube_normal(prof, side, np.cos(u), -np.sin(u), v)

        def n_cyl(x, u, v, side=side):
            return _tube_normal(prof, side, 0.0, -1.0, v)

        out += [
            (R3Chart(annulus, (0.0, 1.0, 0.0, two_pi), (coarse, res), pou=annulus_pou,
                     name=f"annulus{tag}", part="graph"), up),
            (R3Chart(ring, (eps + c, RB, 0.0, two_pi), (coarse, res), name=f"ring{tag}", part="neck"), n_ring),
        ] + [
            (R3Chart(arc, dom, (pn, pn), name=f"arc{tag}-{j}", part="neck"), n_arc)
            for j, dom in enumerate(arc_panels(arc))
        ] + [
            (R3Chart(cyl, (0.0, 1.0, 0.0, two_pi), (coarse, res), name=f"cyl{tag}", part="neck"), n_cyl),
        ]
    return out


def _graded_panels(end, length, scale, ratio=0.5):
    """Intervals tiling ``[end - length, end]``, shrinking geometrically toward ``end``
    until they are narrower than ``scale / 50``."""
    d = [length]
    while d[-1] > scale / 50:
        d.append(d[-1] * ratio)
    return [(end - a, end - b) for a, b in zip(d[:-1], d[1:])] + [(end - d[-1], end)]


def _abs_curvature_density(fn, U, V):
    x = fn(*jets.Jet.seeds(U, V)).full()
    n = np.cross(x.du, x.dv)
    jac = np.linalg.norm(n, axis=-1)
    n = n / jac[..., None]
    E, F, G = (np.sum(a * b, -1) for a, b in ((x.du, x.du), (x.du, x.dv), (x.dv, x.dv)))
    e, f, g = (np.sum(q * n, -1) for q in (x.duu, x.duv, x.dvv))
    return np.abs(e * g - f * f) / (E * G - F * F) * jac


def _panel_rule(doms, nodes, weights):
    """Tensor Gauss rule on many rectangles at once: ``(U, V, W)`` of shape (panels, n*n)."""
    d = np.asarray(doms, dtype=float)
    hu, hv = 0.5 * (d[:, 1] - d[:, 0]), 0.5 * (d[:, 3] - d[:, 2])
    cu, cv = 0.5 * (d[:, 1] + d[:, 0]), 0.5 * (d[:, 3] + d[:, 2])
    xu, xv = np.meshgrid(nodes, nodes, indexing="ij")
    wuv = np.outer(weights, weights).ravel()
    U = cu[:, None] + hu[:, None] * xu.ravel()
    V = cv[:, None] + hv[:, None] * xv.ravel()
    return U, V, (hu * hv)[:, None] * wuv


def _adaptive_panels(fn, doms, tol, n=8, max_panels=4000):
    """Split rectangles until ``int |K| dA`` on each agrees with its two halves.

    Each panel is compared against its halves in ``u`` and in ``v``; a
    panel off by more than ``tol`` is split along the worse direction.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    todo, done = list(doms), []
    while todo:
        if len(done) + len(todo) > max_panels:
            raise ImmersionLost("neck curvature cannot be resolved within the panel budget")
        d = np.asarray(todo, dtype=float)
        mid_u, mid_v = 0.5 * (d[:, 0] + d[:, 1]), 0.5 * (d[:, 2] + d[:, 3])
        halves_u = np.concatenate([np.c_[d[:, 0], mid_u, d[:, 2:]], np.c_[mid_u, d[:, 1], d[:, 2:]]])
        halves_v = np.concatenate([np.c_[d[:, :2], d[:, 2], mid_v], np.c_[d[:, :2], mid_v, d[:, 3]]])
        allp = np.concatenate([d, halves_u, halves_v])
        U, V, W = _panel_rule(allp, x, w)
        q = np.sum(_abs_curvature_density(fn, U.ravel(), V.ravel()).reshape(U.shape) * W, axis=1)
        m = len(d)
        whole, qu, qv = q[:m], q[m:2 * m] + q[2 * m:3 * m], q[3 * m:4 * m] + q[4 * m:]
        eu, ev = np.abs(whole - qu), np.abs(whole - qv)
        todo = []
        for k in range(m):
            if max(eu[k], ev[k]) <= tol:
                done.append(tuple(d[k]))
            elif eu[k] >= ev[k]:
                todo += [tuple(halves_u[k]), tuple(halves_u[k + m])]
            else:
                todo += [tuple(halves_v[k]), tuple(halves_v[k + m])]
    return sorted(done)


def _trace(chart, u, psi):
    return chart.fn(jets.Jet(np.full_like(psi, u)), jets.Jet(psi)).val


def _check_seams(prof, raw, tol=1e-9):
    """Compare boundary traces of adjacent pieces, which must agree pointwise."""
    by = {c.name: c for c, _ in raw}
    psi = np.linspace(0.0, 2 * np.pi, 33)
    for tag in ("R", "L"):
        ann, ring, cyl = (by[n + tag] for n in ("annulus", "ring", "cyl"))
        arcs = sorted((c for n, c in by.items() if n.startswith(f"arc{tag}-")), key=lambda c: c.domain[0])
        pairs = [
            (_trace(ann, 0.0, psi + np.pi / 2), _trace(ring, ring.domain[1], psi)),
            (_trace(ring, ring.domain[0], psi), _trace(arcs[0], 0.0, psi)),
            (_trace(arcs[-1], np.pi / 2, psi), _trace(cyl, 1.0, psi)),
        ]
        other = by["cyl" + ("L" if tag == "R" else "R")]
        pairs.append((_trace(cyl, 0.0, psi), _trace(other, 0.0, psi)))
        for k, (a, b) in enumerate(pairs):
            gap = float(np.max(np.linalg.norm(a - b, axis=-1)))
            if gap > tol * max(1.0, prof.hp):
                raise SeamMismatch(f"neck seam {k} on side {tag} is off by {gap:.2e}")


def handle_charts(prof, resolution=BASE_RESOLUTION):
    """Oriented R^3 charts of the handle block, normals pointing to ``+z`` on the graph."""
    raw = _raw_handle_charts(prof, resolution)
    _check_seams(prof, raw)
    return tuple(_orient_r3(c, n) for c, n in raw)


def handle_surface(profile, resolution=BASE_RESOLUTION):
    """Genus-one block that agrees with the plane ``z = 0`` outside radius ``R2``."""
    return R3Surface(handle_charts(profile, resolution), 1, f"handle:h={profile.h:g}", {"profile": profile})


# --------------------------------------------------------------------------
# gluing handles into a round sphere
# --------------------------------------------------------------------------
def _complete_basis(first_two):
    """Extend two orthonormal vectors of R^4 to an orthonormal basis (as columns)."""
    basis = list(first_two)
    for e in np.eye(4):
        x = e - sum(np.dot(e, b) * b for b in basis)
        n = np.linalg.norm(x)
        if n > 1e-6:
            basis.append(x / n)
        if len(basis) == 4:
            break
    return np.array(basis).T


def _sphere_rotation(p0, q, r):
    """Q in SO(4) with ``Q c = p0`` and ``Q e4 = q``, where ``c = (0, 0, sin r, cos r)``.

    The plane ``x3 = cot r`` then parametrizes the sphere through
    ``x -> Q Pi^{-1}(x)``, with ``q`` at infinity.
    """
    cr, sr = np.cos(r), np.sin(r)
    c = np.array([0.0, 0.0, sr, cr])
    e4 = np.array([0.0, 0.0, 0.0, 1.0])
    U = _complete_basis([c, (e4 - cr * c) / sr])
    W = _complete_basis([p0, (q - cr * p0) / sr])
    if np.linalg.det(U) * np.linalg.det(W) < 0:
        W[:, 3] = -W[:, 3]
    return W @ U.T


def _geodesic(a, b):
    return np.arccos(np.clip(np.sum(a * b, -1), -1.0, 1.0))


def _sphere_points(p0, r, n):
    """Fibonacci points on the sphere of radius ``r`` about ``p0``."""
    c1, c2, c3 = orthonormal_complement(p0)
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    rr = np.sqrt(1.0 - z * z)
    e = np.outer(rr * np.cos(phi), c1) + np.outer(rr * np.sin(phi), c2) + np.outer(z, c3)
    return np.cos(r) * p0 + np.sin(r) * e


def _base_geometry(base):
    try:
        p0, r = np.asarray(base.meta["center"], dtype=float), float(base.meta["radius"])
    except (AttributeError, KeyError):
        raise OutOfRange("handles glue onto a round sphere from round_sphere") from None
    return p0, r


OVERLAP_FACTOR = 2.8
# largest geodesic radius of the planar annulus around a handle
COLLAR_RADIUS = 0.4


def handle_points(base, g, h, seed=0, max_tries=10_000):
    """``g`` seeded points on the base sphere, pairwise farther apart than the
    overlap threshold for handles of scale ``h``."""
    p0, r = _base_geometry(base)
    rng = np.random.default_rng(seed)
    need = 1.5 * OVERLAP_FACTOR * HandleProfile.R2 * h
    out = []
    for _ in range(max_tries):
        if len(out) == g:
            break
        v = rng.normal(size=4)
        v -= np.dot(v, p0) * p0
        v /= np.linalg.norm(v)
        cand = np.cos(r) * p0 + np.sin(r) * v
        if all(_geodesic(cand, o) > need for o in out):
            out.append(cand)
    if len(out) < g:
        raise HandleOverlap(f"cannot place {g} handles of scale {h:g} on the sphere")
    return out


def glue_handles(base, points, h, resolution=None, profile=None):
    """Glue a copy of the handle block, scaled by ``h``, at each point of a round sphere.

    The sphere is the stereographic image of the plane ``x3 = cot r``, so
    the planar collar of each block lies exactly on the sphere; partition
    of unity weights hand the collar over from the sphere charts.
    """
    p0, r = _base_geometry(base)
    points = [np.asarray(p, dtype=float) for p in points]
    prof = profile or HandleProfile(h)
    res = resolution or base.charts[0].resolution[0]
    cr, sr = np.cos(r), np.sin(r)
    for p in points:
        if abs(np.linalg.norm(p) - 1.0) > 1e-9 or abs(np.dot(p, p0) - cr) > 1e-9:
            raise OutOfRange("handle points must lie on the base sphere")
    for i in range(len(points)):
        for j in range(i):
            if _geodesic(points[i], points[j]) <= OVERLAP_FACTOR * prof.R2 * h:
                raise HandleOverlap(f"handles {j} and {i} are closer than {OVERLAP_FACTOR * prof.R2 * h:.3g}")
    label = f"glued:g={len(points)}:h={h:g}"
    meta = {"center": p0, "radius": r, "points": points, "h": h}
    if not points:
        return ChartedSurface(tuple(base.charts), 0, label, meta)

    # projection pole as far from every handle as possible
    cand = _sphere_points(p0, r, 512)
    far = np.min(np.stack([_geodesic(cand, p) for p in points]), axis=0)
    q = cand[int(np.argmax(far))]
    Q = _sphere_rotation(p0, q, r)
    meta["pole"] = q

    def to_plane(y):
        return stereographic(y @ Q)

    def from_plane(x):
        return inverse_stereographic(x).matmul(Q) if isinstance(x, jets.Jet) else inverse_stereographic(x) @ Q.T

    centers, scales, signs, outer = [], [], [], []
    for k, p in enumerate(points):
        xk = to_plane(p)
        sig = h * (1.0 + np.dot(xk, xk)) / 2.0
        up = push_vector(from_plane, xk[None], np.array([[0.0, 0.0, 1.0]]))[0]
        signs.append(1.0 if np.dot(up, (cr * p - p0) / sr) > 0 else -1.0)
        centers.append(xk)
        scales.append(sig)
        # hand over to the sphere across a band the sphere grid can resolve
        room = [COLLAR_RADIUS, 0.3 * _geodesic(p, q)] + [0.45 * _geodesic(p, o) for j, o in enumerate(points) if j != k]
        outer.append(max(min(room) / h, 1.26 * prof.R2))

    def local_radius(k, y):
        x = to_plane(y)
        return np.linalg.norm((x[..., :2] - centers[k][:2]) / scales[k], axis=-1)

    def handover(k, rho):
        return prof.collar_weight(rho, 0.5 * (prof.R2 + outer[k]), outer[k])

    charts = []
    for ch in base.charts:
        pou0 = ch.pou

        def pou(U, V, ch=ch, pou0=pou0):
            y = ch.fn(jets.Jet(np.asarray(U, dtype=float)), jets.Jet(np.asarray(V, dtype=float))).val
            w = np.ones(np.shape(U)) if pou0 is None else np.asarray(pou0(U, V), dtype=float)
            for k in range(len(points)):
                w = w * (1.0 - handover(k, local_radius(k, y)))
            return w

        charts.append(replace(ch, pou=pou))

    for k in range(len(points)):
        M = np.diag([1.0, 1.0, signs[k]]) * scales[k]

        def F(X, k=k, M=M):
            return from_plane(X.matmul(M) + centers[k])

        def plane(t, psi):
            rho = _exp(t)
            return jets.stack([rho * jets.cos(psi), rho * jets.sin(psi), 0.0 * t])

        def plane_pou(t, psi, k=k):
            return handover(k, np.exp(t))

        collar = R3Chart(plane, (np.log(prof.R2), np.log(outer[k]), 0.0, 2 * np.pi), (res // 2, res),
                         pou=plane_pou, name="collar", part="graph")
        cache = {}
        for rc in handle_charts(prof, res) + (_orient_r3(collar, lambda *_: np.array([0.0, 0.0, 1.0])),):
            tc = _transplant_chart(rc, F, cache)
            charts.append(replace(tc, name=f"h{k}:{rc.name}"))
    meta["collar_radii"] = outer
    return ChartedSurface(tuple(charts), len(points), label, meta)


def _exp(t):
    e = np.exp(t.val)
    return jets._chain(t, e, e, e)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------
def _parse_fields(tokens, allowed, spec):
    kw = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or key not in allowed:
            raise OutOfRange(f"unexpected field {tok!r} in {spec!r}; expected {sorted(allowed)}")
        try:
            kw[key] = allowed[key](val)
        except ValueError as exc:
            raise OutOfRange(f"bad value for {key} in {spec!r}") from exc
    return kw


def _number(text):
    """Float that also accepts ``pi`` fractions such as ``pi/2``."""
    t = text.strip().lower()
    if t.startswith("pi"):
        rest = t[2:]
        return np.pi / float(rest[1:]) if rest.startswith("/") else np.pi * (float(rest[1:]) if rest else 1.0)
    return float(t)


def from_spec(spec, resolution=BASE_RESOLUTION):
    """Build a gallery surface from a ``name:key=value:...`` string.

    Recognised names::

        sphere:r=R
        torus:rho=RHO
        perturbed:r=R:a=AMP:seed=N
        transplant:sphere:scale=S
        transplant:ellipsoid:A,B,C:scale=S
        transplant:figure8:scale=S
        handles:g=G:h=H:seed=N[:r=R]
    """
    parts = [p for p in spec.strip().split(":") if p]
    if not parts:
        raise OutOfRange("empty surface spec")
    name, rest = parts[0], parts[1:]
    if name == "sphere":
        kw = _parse_fields(rest, {"r": _number}, spec)
        return round_sphere(r=kw.get("r", np.pi / 2), resolution=resolution)
    if name == "torus":
        kw = _parse_fields(rest, {"rho": _number}, spec)
        return product_torus(kw.get("rho", 1 / np.sqrt(2)), resolution=resolution)
    if name == "perturbed":
        kw = _parse_fields(rest, {"r": _number, "a": _number, "seed": int}, spec)
        return perturbed_sphere(kw.get("r", 1.0), kw.get("a", 0.05), kw.get("seed", 0), resolution)
    if name == "transplant":
        if not rest:
            raise OutOfRange(f"transplant needs a base surface in {spec!r}")
        base, rest = rest[0], rest[1:]
        if base == "ellipsoid":
            if not rest or "=" in rest[0]:
                raise OutOfRange(f"ellipsoid needs semi-axes a,b,c in {spec!r}")
            axes = [_number(x) for x in rest[0].split(",")]
            if len(axes) != 3 or min(axes) <= 0:
                raise OutOfRange(f"ellipsoid needs three positive semi-axes in {spec!r}")
            s0, rest = ellipsoid(*axes, resolution=resolution), rest[1:]
        elif base == "sphere":
            s0 = ellipsoid(resolution=resolution)
        elif base == "figure8":
            s0 = figure8_torus(resolution=resolution)
        else:
            raise OutOfRange(f"unknown transplant base {base!r}")
        kw = _parse_fields(rest, {"scale": _number}, spec)
        return stereographic_transplant(s0, kw.get("scale", 1e-3))
    if name == "handles":
        kw = _parse_fields(rest, {"g": int, "h": _number, "seed": int, "r": _number}, spec)
        h = kw.get("h", 0.02)
        base = round_sphere(r=kw.get("r", np.pi / 2), resolution=resolution)
        pts = handle_points(base, kw.get("g", 1), h, seed=kw.get("seed", 0))
        return glue_handles(base, pts, h, resolution=resolution)
    raise OutOfRange(f"unknown surface family {name!r}")
