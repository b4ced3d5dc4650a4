"""Charted surfaces in S^3 and their per-sample frames.

A surface is a list of :class:`Chart` objects.  Each chart maps a parameter
rectangle into the unit sphere of R^4 and may carry a partition-of-unity
weight so that overlapping charts integrate correctly.  Evaluating all charts
on their Gauss-Legendre grids yields a :class:`FrameSet`: a column store of
positions, normals, fundamental forms and principal curvatures.

Curvature sign convention: along the surface ``d nu = -kappa d phi`` for the
principal directions, so the second fundamental form is ``<d^2 phi, nu>``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import DegenerateChart, NotUnit
from .quat_gr import wedge

IMMERSION_TOL = 1e-8
SPHERE_TOL = 1e-9
BASE_RESOLUTION = 64
EXPORT_VERSION = 1


@dataclass(frozen=True)
class Chart:
    """A parametrized patch ``fn(u, v) -> R^4`` on a rectangle.

    ``fn`` receives two :class:`~gaussarea.jets.Jet` arguments and returns a
    jet whose trailing axis has length 4.  With ``derivative_mode="fd"`` only
    the values of the jets are used and derivatives come from central
    differences with step ``fd_step``.

    ``pou`` maps parameter arrays of ``fn`` to partition-of-unity weights.
    ``flip`` reverses the ``u`` direction, which reverses the chart
    orientation; ``pou`` always sees the unreversed parameters.
    """

    fn: Callable
    domain: tuple
    resolution: tuple = (BASE_RESOLUTION, BASE_RESOLUTION)
    derivative_mode: str = "analytic"
    fd_step: float = 1e-5
    pou: Optional[Callable] = None
    flip: bool = False
    name: str = ""

    def _seed(self, u, v):
        u0, u1, _, _ = self.domain
        if self.flip:
            U = jets.Jet(u0 + u1 - u, -np.ones_like(u), np.zeros_like(u))
            _, V = jets.Jet.seeds(u, v)
            return U, V
        return jets.Jet.seeds(u, v)

    def _value(self, u, v):
        u0, u1, _, _ = self.domain
        uu = u0 + u1 - u if self.flip else u
        return self.fn(jets.Jet(uu), jets.Jet(v)).val

    def evaluate(self, u, v):
        """Position and derivatives ``(phi, phi_u, phi_v, phi_uu, phi_uv, phi_vv)``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.derivative_mode == "analytic":
            out = self.fn(*self._seed(u, v)).full()
            return out.components()
        if self.derivative_mode != "fd":
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        h = self.fd_step
        f = self._value
        c = f(u, v)
        fp0, fm0 = f(u + h, v), f(u - h, v)
        f0p, f0m = f(u, v + h), f(u, v - h)
        fpp, fpm = f(u + h, v + h), f(u + h, v - h)
        fmp, fmm = f(u - h, v + h), f(u - h, v - h)
        return (
            c,
            (fp0 - fm0) / (2 * h),
            (f0p - f0m) / (2 * h),
            (fp0 - 2 * c + fm0) / h**2,
            (fpp - fpm - fmp + fmm) / (4 * h**2),
            (f0p - 2 * c + f0m) / h**2,
        )

    def evaluate_first(self, u, v):
        """Position and first derivatives ``(phi, phi_u, phi_v)`` only."""
        if self.derivative_mode != "analytic":
            return self.evaluate(u, v)[:3]
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        with jets.first_order():
            out = self.fn(*self._seed(u, v))
        shp = out.shape
        return tuple(np.array(np.broadcast_to(c, shp)) for c in (out.val, out.du, out.dv))

    def nodes(self):
        """Tensor Gauss-Legendre nodes ``(u, v)`` and weights on the domain."""
        u0, u1, v0, v1 = self.domain
        nu, nv = self.resolution
        xu, wu = np.polynomial.legendre.leggauss(nu)
        xv, wv = np.polynomial.legendre.leggauss(nv)
        u = 0.5 * (u1 - u0) * (xu + 1) + u0
        v = 0.5 * (v1 - v0) * (xv + 1) + v0
        U, V = np.meshgrid(u, v, indexing="ij")
        W = np.outer(wu * 0.5 * (u1 - u0), wv * 0.5 * (v1 - v0))
        return U.ravel(), V.ravel(), W.ravel()

    def weights_at(self, u, v):
        if self.pou is None:
            return np.ones(np.shape(u))
        if self.flip:
            u0, u1, _, _ = self.domain
            u = u0 + u1 - np.asarray(u)
        return np.asarray(self.pou(u, v), dtype=float) * np.ones(np.shape(u))


@dataclass(frozen=True)
class ChartedSurface:
    charts: tuple
    genus: int
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "charts", tuple(self.charts))
        object.__setattr__(self, "_frames", None)

    @property
    def analytic(self):
        return all(c.derivative_mode == "analytic" for c in self.charts)

    def with_resolution(self, n):
        """Scale every chart resolution by ``n / 64``."""
        scale = n / BASE_RESOLUTION
        charts = [
            replace(c, resolution=tuple(max(4, int(round(r * scale))) for r in c.resolution))
            for c in self.charts
        ]
        return ChartedSurface(charts, self.genus, self.label, dict(self.meta))

    def with_derivative_mode(self, mode, step=1e-5):
        charts = [replace(c, derivative_mode=mode, fd_step=step) for c in self.charts]
        return ChartedSurface(charts, self.genus, self.label, dict(self.meta))

    def frames(self):
        if self._frames is None:
            object.__setattr__(self, "_frames", build_frames(self))
        return self._frames


@dataclass(frozen=True)
class SampleFrame:
    chart: int
    u: float
    v: float
    phi: np.ndarray
    nu: np.ndarray
    phi_u: np.ndarray
    phi_v: np.ndarray
    first_form: tuple
    second_form: tuple
    kappa1: float
    kappa2: float
    H: float
    K: float
    jac: float
    jac_G: float
    weight: float


def cross4(a, b, c):
    """Vector ``X`` with ``<X, d> = det(a, b, c, d)`` for all ``d``."""
    m = np.stack([a, b, c], axis=-2)
    cols = []
    for i in range(4):
        keep = [j for j in range(4) if j != i]
        minor = np.linalg.det(m[..., keep])
        cols.append((-1) ** (i + 3) * minor)
    return np.stack(cols, axis=-1)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


class FrameSet:
    """Column store of frames at every quadrature node of a surface.

    Attributes are flat arrays over samples.  ``weight`` includes the
    partition-of-unity factor, ``dA = weight * jac`` is the area element and
    ``mu = weight * jac_G`` the Gauss area element.
    """

    def __init__(self, **cols):
        self._cols = cols
        for k, v in cols.items():
            setattr(self, k, v)

    def __len__(self):
        return len(self.weight)

    def __getitem__(self, i):
        return SampleFrame(
            int(self.chart[i]), float(self.u[i]), float(self.v[i]),
            self.phi[i], self.nu[i], self.phi_u[i], self.phi_v[i],
            (float(self.E[i]), float(self.F[i]), float(self.G[i])),
            (float(self.e[i]), float(self.f[i]), float(self.g[i])),
            float(self.kappa1[i]), float(self.kappa2[i]),
            float(self.H[i]), float(self.K[i]),
            float(self.jac[i]), float(self.jac_G[i]), float(self.weight[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dA(self):
        return self.weight * self.jac

    @property
    def mu(self):
        return self.weight * self.jac_G


def _chart_frames(chart, index):
    U, V, W = chart.nodes()
    pou = chart.weights_at(U, V)
    keep = pou > 0
    U, V, W, pou = U[keep], V[keep], W[keep], pou[keep]
    p, pu, pv, puu, puv, pvv = chart.evaluate(U, V)

    norm_defect = np.abs(np.linalg.norm(p, axis=-1) - 1.0)
    if norm_defect.size and norm_defect.max() > SPHERE_TOL:
        raise NotUnit(f"chart {chart.name or index} leaves S^3 by {norm_defect.max():.2e}")

    E, F, G = _dot(pu, pu), _dot(pu, pv), _dot(pv, pv)
    det1 = E * G - F * F
    jac = np.sqrt(np.maximum(det1, 0.0))
    # relative test: transplanted surfaces are legitimately tiny
    if jac.size and jac.min() < IMMERSION_TOL * jac.max():
        raise DegenerateChart(f"chart {chart.name or index}: Jac(phi) = {jac.min():.2e}")

    X = cross4(p, pu, pv)
    Xn = np.linalg.norm(X, axis=-1)[:, None]
    nu = X / Xn
    # derivatives of the normal, independent of the curvature formulas
    Xu = cross4(p, puu, pv) + cross4(p, pu, puv)
    Xv = cross4(p, puv, pv) + cross4(p, pu, pvv)
    nu_u = (Xu - nu * _dot(nu, Xu)[:, None]) / Xn
    nu_v = (Xv - nu * _dot(nu, Xv)[:, None]) / Xn

    e, f, g = _dot(puu, nu), _dot(puv, nu), _dot(pvv, nu)
    H = (e * G - 2 * f * F + g * E) / (2 * det1)
    Kext = (e * g - f * f) / det1
    disc = np.sqrt(np.maximum(H * H - Kext, 0.0))
    k1, k2 = H + disc, H - disc
    jac_G = np.sqrt(1 + k1 * k1) * np.sqrt(1 + k2 * k2) * jac

    return dict(
        chart=np.full(U.shape, index), u=U, v=V,
        phi=p, nu=nu, phi_u=pu, phi_v=pv, nu_u=nu_u, nu_v=nu_v,
        E=E, F=F, G=G, e=e, f=f, g=g,
        kappa1=k1, kappa2=k2, H=H, K=1 + k1 * k2,
        jac=jac, jac_G=jac_G, weight=W * pou, pou=pou,
    )


def build_frames(s):
    """Frames at all quadrature nodes of all charts of ``s``."""
    parts = [_chart_frames(c, i) for i, c in enumerate(s.charts)]
    cols = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return FrameSet(**cols)


def frames_of(s):
    return s.frames() if isinstance(s, ChartedSurface) else s


# --------------------------------------------------------------------------
# Gauss map and lifts
# --------------------------------------------------------------------------
def gauss_map(fr):
    """``G = phi ^ nu`` for a frame or a whole frame set."""
    return wedge(fr.phi, fr.nu)


def gauss_map_derivatives(fs):
    Gu = wedge(fs.phi_u, fs.nu) + wedge(fs.phi, fs.nu_u)
    Gv = wedge(fs.phi_v, fs.nu) + wedge(fs.phi, fs.nu_v)
    return Gu, Gv


def direct_jac_G(fs):
    """``|G_u ^ G_v|`` from the Gram determinant in Lambda^2 R^4."""
    Gu, Gv = gauss_map_derivatives(fs)
    gram = _dot(Gu, Gu) * _dot(Gv, Gv) - _dot(Gu, Gv) ** 2
    return np.sqrt(np.maximum(gram, 0.0))


def legendrian_lift(fs):
    """Return ``(phi, nu, defect)`` where defect is ``max |<phi, d nu>|``."""
    fs = frames_of(fs)
    d = np.maximum(np.abs(_dot(fs.phi, fs.nu_u)), np.abs(_dot(fs.phi, fs.nu_v)))
    scale = np.sqrt(np.maximum(fs.E, fs.G))
    return fs.phi, fs.nu, d / scale


def lagrangian_defect(s):
    """Largest normalized ``|G^* omega(d_u, d_v)|`` over the samples.

    The tangent vectors ``G_u = phi_u ^ nu + phi ^ nu_u`` are in normal form
    ``a ^ w + v ^ b`` with ``a = phi``, ``b = nu``, ``v = phi_u``, ``w = nu_u``.
    The value is divided by ``|G_u| |G_v|`` so it is scale free.
    """
    from .quat_gr import TangentGrass, _project_out, symplectic_omega

    fs = frames_of(s)
    a, b = fs.phi, fs.nu
    tu = _tangent(TangentGrass, _project_out, a, b, fs.phi_u, fs.nu_u)
    tv = _tangent(TangentGrass, _project_out, a, b, fs.phi_v, fs.nu_v)
    om = symplectic_omega(tu, tv)
    Gu, Gv = gauss_map_derivatives(fs)
    norm = np.linalg.norm(Gu, axis=-1) * np.linalg.norm(Gv, axis=-1)
    return float(np.max(np.abs(om) / norm))


def _tangent(cls, project, a, b, v, w):
    return cls(a, b, project(v, a, b), project(w, a, b))


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------
EXPORT_COLUMNS = ("phi0", "phi1", "phi2", "phi3", "nu0", "nu1", "nu2", "nu3", "kappa1", "kappa2", "weight")


def export_surface(s, path):
    """Write ``<path>.json`` header and ``<path>.bin`` little-endian samples."""
    path = Path(path)
    fs = frames_of(s)
    data = np.column_stack([fs.phi, fs.nu, fs.kappa1, fs.kappa2, fs.weight]).astype("<f8")
    bin_path = path.with_suffix(".bin")
    data.tofile(bin_path)
    header = {
        "format": "gaussarea-surface",
        "version": EXPORT_VERSION,
        "label": s.label,
        "genus": s.genus,
        "charts": [
            {"name": c.name, "domain": list(map(float, c.domain)), "resolution": list(c.resolution),
             "derivative_mode": c.derivative_mode}
            for c in s.charts
        ],
        "n_samples": int(data.shape[0]),
        "columns": list(EXPORT_COLUMNS),
        "dtype": "<f8",
        "data_file": bin_path.name,
    }
    path.with_suffix(".json").write_text(json.dumps(header, indent=2))
    return path.with_suffix(".json")


def load_export(path):
    """Read an export back as ``(header, array)``."""
    path = Path(path).with_suffix(".json")
    header = json.loads(path.read_text())
    if header.get("version") != EXPORT_VERSION:
        raise ValueError(f"unsupported export version {header.get('version')}")
    raw = np.fromfile(path.with_name(header["data_file"]), dtype=header["dtype"])
    return header, raw.reshape(header["n_samples"], len(header["columns"]))
