"""Closed smooth hypersurfaces in R^2 and R^3 and their curvature data.

All built-in d=3 surfaces are star-shaped radial graphs x = rho(xhat) * xhat
over the unit sphere, described by a support function rho together with its
ambient gradient and Hessian (0-homogeneous extension).  Two spherical charts
with different polar axes cover the surface without coordinate singularities
meeting any trajectory.  d=2 surfaces are closed parametrized curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh as generalized_eigh


class GeometryError(ValueError):
    """Invalid surface specification."""


class ChartSingularity(RuntimeError):
    """Jet requested too close to a chart pole (sqrt(det g) < 1e-12)."""


# ---------------------------------------------------------------------------
# Surface specification


@dataclass(frozen=True)
class SurfaceSpec:
    kind: str
    params: dict
    ambient_dim: int

    def as_config(self) -> dict:
        """Serializable config block."""
        out = {"kind": self.kind, "ambient_dim": self.ambient_dim}
        for key, val in self.params.items():
            if callable(val):
                out[key] = f"<callable {getattr(val, '__name__', 'profile')}>"
            elif isinstance(val, np.ndarray):
                out[key] = val.tolist()
            else:
                out[key] = val
        return out


def sphere(radius: float = 1.0) -> SurfaceSpec:
    if radius <= 0:
        raise GeometryError("sphere radius must be positive")
    return SurfaceSpec("sphere", {"radius": float(radius)}, 3)


def ellipsoid(a: float, b: float, c: float,
              rotation: np.ndarray | None = None,
              scale: float = 1.0) -> SurfaceSpec:
    if min(a, b, c) <= 0 or scale <= 0:
        raise GeometryError("ellipsoid semi-axes and scale must be positive")
    params = {"a": float(a), "b": float(b), "c": float(c), "scale": float(scale)}
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=float)
        if rotation.shape != (3, 3) or abs(np.linalg.det(rotation) - 1.0) > 1e-10:
            raise GeometryError("rotation must be a proper 3x3 rotation matrix")
        params["rotation"] = rotation
    return SurfaceSpec("ellipsoid", params, 3)


def surface_of_revolution(profile: Callable[[float], float],
                          dprofile: Callable[[float], float] | None = None,
                          d2profile: Callable[[float], float] | None = None
                          ) -> SurfaceSpec:
    """Radial profile rho = profile(polar angle), polar angle in [0, pi]."""
    probe = [profile(t) for t in np.linspace(0.0, math.pi, 33)]
    if min(probe) <= 0:
        raise GeometryError("profile must be strictly positive")
    return SurfaceSpec(
        "surface_of_revolution",
        {"profile": profile, "dprofile": dprofile, "d2profile": d2profile},
        3,
    )


def ellipse2d(a: float, b: float) -> SurfaceSpec:
    if min(a, b) <= 0:
        raise GeometryError("ellipse semi-axes must be positive")
    return SurfaceSpec("ellipse2d", {"a": float(a), "b": float(b)}, 2)


def circle(radius: float = 1.0) -> SurfaceSpec:
    return ellipse2d(radius, radius)


def smooth_star2d(coefficients: Sequence[float], base: float = 1.0) -> SurfaceSpec:
    """r(t) = base + sum_k c_{2k} cos((k+1)t) + c_{2k+1} sin((k+1)t)."""
    coeffs = np.asarray(coefficients, dtype=float)
    if base - np.sum(np.abs(coeffs)) <= 0:
        raise GeometryError("star curve radius may vanish: shrink coefficients")
    return SurfaceSpec("smooth_star2d", {"coefficients": coeffs, "base": float(base)}, 2)


# ---------------------------------------------------------------------------
# Support functions rho(v) with ambient gradient / Hessian (d = 3)


class _SphereRho:
    def __init__(self, radius):
        self.radius = radius

    def jet(self, v):
        return self.radius, np.zeros(3), np.zeros((3, 3))


class _EllipsoidRho:
    """rho(v) = scale * sqrt(v.v / v.Qv), Q = diag(a,b,c)^{-2}, axes rotated by R."""

    def __init__(self, a, b, c, rotation=None, scale=1.0):
        self.qdiag = np.array([1.0 / a ** 2, 1.0 / b ** 2, 1.0 / c ** 2])
        self.rotation = rotation
        self.scale = scale

    def _jet_axes(self, v):
        s = v @ v
        qv = self.qdiag * v
        q = v @ qv
        rho = math.sqrt(s / q)
        w = v / s - qv / q
        grad = rho * w
        dw = (np.eye(3) / s - 2.0 * np.outer(v, v) / s ** 2
              - np.diag(self.qdiag) / q + 2.0 * np.outer(qv, qv) / q ** 2)
        hess = rho * (np.outer(w, w) + dw)
        return rho, grad, hess

    def jet(self, v):
        if self.rotation is None:
            rho, grad, hess = self._jet_axes(v)
        else:
            rot = self.rotation
            rho, grad, hess = self._jet_axes(rot.T @ v)
            grad = rot @ grad
            hess = rot @ hess @ rot.T
        return self.scale * rho, self.scale * grad, self.scale * hess


class _RevolutionRho:
    """rho(v) = f(polar angle of v), with analytic or FD profile derivatives."""

    _FD_STEP = 1e-5 * math.pi

    def __init__(self, profile, dprofile=None, d2profile=None):
        self.f = profile
        self.fp = dprofile or self._fd1
        self.fpp = d2profile or self._fd2

    def _fd1(self, t):
        h = self._FD_STEP
        return (8 * (self.f(t + h) - self.f(t - h))
                - (self.f(t + 2 * h) - self.f(t - 2 * h))) / (12 * h)

    def _fd2(self, t):
        h = self._FD_STEP
        return (16 * (self.f(t + h) + self.f(t - h))
                - (self.f(t + 2 * h) + self.f(t - 2 * h))
                - 30 * self.f(t)) / (12 * h ** 2)

    def jet(self, v):
        nv = math.sqrt(v @ v)
        t = v[2] / nv
        t = min(1.0, max(-1.0, t))
        theta = math.acos(t)
        sin2 = 1.0 - t * t
        if sin2 < 1e-24:
            # smooth pole requires f'(0) = f'(pi) = 0; then grad = 0 there and
            # the Hessian reduces to the meridian second derivative
            fpp = self.fpp(theta)
            hess = np.zeros((3, 3))
            hess[0, 0] = hess[1, 1] = fpp / nv ** 2
            return self.f(theta), np.zeros(3), hess
        e3 = np.array([0.0, 0.0, 1.0])
        dt = e3 / nv - v[2] * v / nv ** 3
        inv_sin = 1.0 / math.sqrt(sin2)
        dtheta = -inv_sin * dt
        d2t = (-(np.outer(e3, v) + np.outer(v, e3)) / nv ** 3
               - v[2] * (np.eye(3) / nv ** 3 - 3.0 * np.outer(v, v) / nv ** 5))
        d2theta = -t * inv_sin ** 3 * np.outer(dt, dt) - inv_sin * d2t
        fp = self.fp(theta)
        grad = fp * dtheta
        hess = self.fpp(theta) * np.outer(dtheta, dtheta) + fp * d2theta
        return self.f(theta), grad, hess


# ---------------------------------------------------------------------------
# Charts on S^2: standard spherical coordinates about two polar axes

# chart 1 permutes the polar axis to +x so that the z-poles are regular there
_CHART_MAPS = (
    np.eye(3),
    np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
)
N_CHARTS = 2


def _sphere_chart(u, chart_id):
    """Unit vector and its first/second chart derivatives."""
    theta, phi = u
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    b = np.array([st * cp, st * sp, ct])
    b_t = np.array([ct * cp, ct * sp, -st])
    b_p = np.array([-st * sp, st * cp, 0.0])
    b_tt = -b
    b_tp = np.array([-ct * sp, ct * cp, 0.0])
    b_pp = np.array([-st * cp, -st * sp, 0.0])
    m = _CHART_MAPS[chart_id]
    d1 = np.column_stack([m @ b_t, m @ b_p])
    d2 = np.empty((3, 2, 2))
    d2[:, 0, 0] = m @ b_tt
    d2[:, 0, 1] = d2[:, 1, 0] = m @ b_tp
    d2[:, 1, 1] = m @ b_pp
    return m @ b, d1, d2


def _chart_coords(direction, chart_id):
    """Chart coordinates of a unit direction."""
    v = _CHART_MAPS[chart_id].T @ direction
    theta = math.acos(min(1.0, max(-1.0, v[2])))
    phi = math.atan2(v[1], v[0]) % (2.0 * math.pi)
    return np.array([theta, phi])


def best_chart(direction) -> int:
    """Chart whose poles are farthest from the given unit direction."""
    return 0 if abs(direction[2]) <= abs(direction[0]) else 1


# ---------------------------------------------------------------------------
# Jets and surfaces


@dataclass(frozen=True)
class ChartPoint:
    chart_id: int
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))


@dataclass(frozen=True)
class GeometryJet:
    position: np.ndarray
    normal: np.ndarray
    metric: np.ndarray
    metric_inverse: np.ndarray
    second_fundamental: np.ndarray
    mean_curvature: float
    principal_curvatures: np.ndarray
    area_element: float
    tangents: np.ndarray          # columns = d(position)/du_i
    chart_point: ChartPoint


class Surface:
    """Handle exposing chart evaluation and jets; immutable."""

    def __init__(self, spec: SurfaceSpec):
        self.spec = spec
        self.ambient_dim = spec.ambient_dim
        if spec.ambient_dim == 3:
            self._rho = _make_rho(spec)
        else:
            self._curve = _make_curve(spec)

    # -- d = 3 -------------------------------------------------------------

    def radial(self, direction):
        """Support radius rho along a unit direction (d=3)."""
        rho, _, _ = self._rho.jet(np.asarray(direction, dtype=float))
        return rho

    def position(self, p: ChartPoint) -> np.ndarray:
        if self.ambient_dim == 3:
            xhat, _, _ = _sphere_chart(p.u, p.chart_id)
            return self.radial(xhat) * xhat
        pos, _, _ = self._curve(p.u[0])
        return pos

    def chart_point(self, direction, chart_id=None) -> ChartPoint:
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        if chart_id is None:
            chart_id = best_chart(direction)
        return ChartPoint(chart_id, _chart_coords(direction, chart_id))

    def jet(self, p: ChartPoint) -> GeometryJet:
        if self.ambient_dim == 3:
            return self._jet3(p)
        return self._jet2(p)

    def _jet3(self, p: ChartPoint) -> GeometryJet:
        xhat, d1, d2 = _sphere_chart(p.u, p.chart_id)
        rho, grad, hess = self._rho.jet(xhat)
        pos = rho * xhat
        tangents = np.empty((3, 2))
        for i in range(2):
            tangents[:, i] = (grad @ d1[:, i]) * xhat + rho * d1[:, i]
        second = np.empty((3, 2, 2))
        for i in range(2):
            for j in range(i, 2):
                sij = ((d1[:, i] @ hess @ d1[:, j] + grad @ d2[:, i, j]) * xhat
                       + (grad @ d1[:, i]) * d1[:, j]
                       + (grad @ d1[:, j]) * d1[:, i]
                       + rho * d2[:, i, j])
                second[:, i, j] = sij
                second[:, j, i] = sij
        g = tangents.T @ tangents
        detg = g[0, 0] * g[1, 1] - g[0, 1] ** 2
        if detg <= 0 or math.sqrt(max(detg, 0.0)) < 1e-12:
            raise ChartSingularity(f"chart {p.chart_id} degenerate at u={p.u}")
        nvec = np.cross(tangents[:, 0], tangents[:, 1])
        nu = nvec / np.linalg.norm(nvec)
        if nu @ pos < 0:  # outward for star-shaped bodies about the origin
            nu = -nu
        a = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                a[i, j] = -second[:, i, j] @ nu
        ginv = np.array([[g[1, 1], -g[0, 1]], [-g[0, 1], g[0, 0]]]) / detg
        kappas = generalized_eigh(a, g, eigvals_only=True)
        mean_h = 0.5 * float(np.trace(ginv @ a))
        return GeometryJet(pos, nu, g, ginv, a, mean_h, np.sort(kappas),
                           math.sqrt(detg), tangents, p)

    # -- d = 2 -------------------------------------------------------------

    def _jet2(self, p: ChartPoint) -> GeometryJet:
        t = p.u[0]
        pos, d1, d2 = self._curve(t)
        speed2 = d1 @ d1
        if speed2 < 1e-24:
            raise ChartSingularity(f"degenerate curve parametrization at t={t}")
        speed = math.sqrt(speed2)
        nu = np.array([d1[1], -d1[0]]) / speed
        if nu @ pos < 0:
            nu = -nu
        g = np.array([[speed2]])
        a = np.array([[-(d2 @ nu)]])
        kappa = a[0, 0] / speed2
        return GeometryJet(pos, nu, g, np.array([[1.0 / speed2]]), a, kappa,
                           np.array([kappa]), speed, d1.reshape(2, 1), p)


def _make_rho(spec: SurfaceSpec):
    if spec.kind == "sphere":
        return _SphereRho(spec.params["radius"])
    if spec.kind == "ellipsoid":
        return _EllipsoidRho(spec.params["a"], spec.params["b"], spec.params["c"],
                             rotation=spec.params.get("rotation"),
                             scale=spec.params.get("scale", 1.0))
    if spec.kind == "surface_of_revolution":
        return _RevolutionRho(spec.params["profile"], spec.params.get("dprofile"),
                              spec.params.get("d2profile"))
    raise GeometryError(f"unknown d=3 surface kind {spec.kind!r}")


def _make_curve(spec: SurfaceSpec):
    if spec.kind == "ellipse2d":
        a, b = spec.params["a"], spec.params["b"]

        def curve(t):
            ct, st = math.cos(t), math.sin(t)
            return (np.array([a * ct, b * st]),
                    np.array([-a * st, b * ct]),
                    np.array([-a * ct, -b * st]))

        return curve
    if spec.kind == "smooth_star2d":
        coeffs = spec.params["coefficients"]
        base = spec.params["base"]

        def radial(t):
            r, dr, d2r = base, 0.0, 0.0
            for idx, c in enumerate(coeffs):
                k = idx // 2 + 1
                if idx % 2 == 0:
                    r += c * math.cos(k * t)
                    dr += -c * k * math.sin(k * t)
                    d2r += -c * k * k * math.cos(k * t)
                else:
                    r += c * math.sin(k * t)
                    dr += c * k * math.cos(k * t)
                    d2r += -c * k * k * math.sin(k * t)
            return r, dr, d2r

        def curve(t):
            r, dr, d2r = radial(t)
            ct, st = math.cos(t), math.sin(t)
            e = np.array([ct, st])
            ep = np.array([-st, ct])
            pos = r * e
            d1 = dr * e + r * ep
            d2 = (d2r - r) * e + 2.0 * dr * ep
            return pos, d1, d2

        return curve
    raise GeometryError(f"unknown d=2 surface kind {spec.kind!r}")


def build_surface(spec: SurfaceSpec) -> Surface:
    return Surface(spec)


# ---------------------------------------------------------------------------
# Node sets


@dataclass
class NodeSet:
    surface: Surface
    chart_points: list
    jets: list
    positions: np.ndarray       # (N, d)
    normals: np.ndarray         # (N, d)
    weights: np.ndarray         # (N,) surface quadrature weights
    # d = 3 extras (None in d = 2)
    directions: np.ndarray | None = None   # unit-sphere directions
    sphere_weights: np.ndarray | None = None
    jacobians: np.ndarray | None = None    # dsigma / dS^2
    degree: int | None = None              # product-quadrature degree L
    # d = 2 extras
    params: np.ndarray | None = None
    speeds: np.ndarray | None = None

    def __len__(self):
        return len(self.weights)

    @property
    def spacing(self) -> float:
        """Representative node spacing."""
        area = float(np.sum(self.weights))
        n = len(self.weights)
        if self.surface.ambient_dim == 3:
            return math.sqrt(area / n)
        return area / n


def node_set(surface: Surface, resolution: int) -> NodeSet:
    if resolution < 8:
        raise GeometryError("resolution must be at least 8")
    if surface.ambient_dim == 3:
        return _node_set3(surface, resolution)
    return _node_set2(surface, resolution)


def _node_set3(surface: Surface, n_theta: int) -> NodeSet:
    n_phi = 2 * n_theta
    ucos, wgl = np.polynomial.legendre.leggauss(n_theta)
    thetas = np.arccos(ucos[::-1])          # increasing theta
    wgl = wgl[::-1]
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    chart_points, jets = [], []
    npts = n_theta * n_phi
    positions = np.empty((npts, 3))
    normals = np.empty((npts, 3))
    weights = np.empty(npts)
    directions = np.empty((npts, 3))
    s2w = np.empty(npts)
    jac = np.empty(npts)
    idx = 0
    for k, theta in enumerate(thetas):
        st = math.sin(theta)
        for phi in phis:
            cp = ChartPoint(0, np.array([theta, phi]))
            jet = surface.jet(cp)
            chart_points.append(cp)
            jets.append(jet)
            positions[idx] = jet.position
            normals[idx] = jet.normal
            directions[idx], _, _ = _sphere_chart(cp.u, 0)
            s2w[idx] = wgl[k] * (2.0 * math.pi / n_phi)
            jac[idx] = jet.area_element / st
            weights[idx] = s2w[idx] * jac[idx]
            idx += 1
    return NodeSet(surface, chart_points, jets, positions, normals, weights,
                   directions=directions, sphere_weights=s2w, jacobians=jac,
                   degree=n_theta - 1)


def _node_set2(surface: Surface, n: int) -> NodeSet:
    ts = 2.0 * math.pi * np.arange(n) / n
    dt = 2.0 * math.pi / n
    chart_points, jets = [], []
    positions = np.empty((n, 2))
    normals = np.empty((n, 2))
    weights = np.empty(n)
    speeds = np.empty(n)
    for j, t in enumerate(ts):
        cp = ChartPoint(0, np.array([t]))
        jet = surface.jet(cp)
        chart_points.append(cp)
        jets.append(jet)
        positions[j] = jet.position
        normals[j] = jet.normal
        speeds[j] = jet.area_element
        weights[j] = jet.area_element * dt
    return NodeSet(surface, chart_points, jets, positions, normals, weights,
                   params=ts, speeds=speeds)


# ---------------------------------------------------------------------------
# Assumption (A) margin


def assumption_a_margin(surface: Surface, angular_resolution: int = 64,
                        nodes: NodeSet | None = None) -> float:
    """min over nodes x and unit covectors omega of |(d-1)H - <A g^-1 w, g^-1 w>|.

    In the principal frame the quantity equals |r(omega)| with
    r = sum_i ktilde_i omega_i^2, ktilde_i = sum_j kappa_j - kappa_i.
    """
    if surface.ambient_dim != 3:
        raise GeometryError("assumption (A) margin is defined for d = 3 only")
    if nodes is None:
        nodes = node_set(surface, 16)
    thetas = 2.0 * math.pi * np.arange(angular_resolution) / angular_resolution
    c2, s2 = np.cos(thetas) ** 2, np.sin(thetas) ** 2
    margin = math.inf
    for jet in nodes.jets:
        k1, k2 = jet.principal_curvatures
        kt1, kt2 = k2, k1  # complementary sums in d = 3
        margin = min(margin, float(np.min(np.abs(kt1 * c2 + kt2 * s2))))
    return margin


def surface_point(surface: Surface, name_or_direction) -> ChartPoint:
    """Resolve a named point ('pole', 'equator') or an ambient direction."""
    if isinstance(name_or_direction, str):
        name = name_or_direction.lower()
        if name in ("pole", "north", "tip"):
            direction = np.array([0.0, 0.0, 1.0])
        elif name in ("south",):
            direction = np.array([0.0, 0.0, -1.0])
        elif name == "equator":
            direction = np.array([1.0, 0.0, 0.0])
        else:
            raise GeometryError(f"unknown named point {name_or_direction!r}")
    else:
        direction = np.asarray(name_or_direction, dtype=float)
    return surface.chart_point(direction)
