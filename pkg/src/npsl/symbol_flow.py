"""Principal symbol of the NP operator, Hamiltonian flow, and variety volumes.

The order -1 principal symbol in general chart coordinates is

    p(x, xi) = (d-1) H(x) |xi|_g^{-1} - <A g^{-1} xi, g^{-1} xi> |xi|_g^{-3},

with H the mean curvature, A the second fundamental form, g the chart metric,
and |xi|_g^2 = xi^T g^{-1} xi.  The flow Hamiltonian is its square H = p^2,
homogeneous of degree -2 in the fiber; "rho" and "arctan" regularizations
compose H with rho(r) = 1 - exp(-r) and arctan respectively, which rescale the
Hamiltonian vector field without changing orbits.

In the principal-curvature frame the characteristic variety {H(p,.) = 1} is
the polar curve r(omega) = ktilde_1 w_1^2 + ktilde_2 w_2^2 (d = 3), with
ktilde_i the sum of the other principal curvatures; its arc-length measure
sqrt(r^2 + r'^2) dtheta is the ground-truth weight for all volume integrals.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .geometry import (ChartPoint, ChartSingularity, GeometryJet, Surface,
                       best_chart, _chart_coords, _sphere_chart)


class SymbolError(ValueError):
    """Raised for invalid covectors or singular symbol evaluations."""


class FlowError(RuntimeError):
    """Raised when the Hamiltonian flow leaves its validity region."""


class VarietyDegeneracyError(RuntimeError):
    """Raised when a variety integral diverges at zeros of r(omega)."""


HAMILTONIAN_KINDS = ("raw", "rho", "arctan")


@dataclass(frozen=True)
class CotangentPoint:
    base: ChartPoint
    xi: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: list                      # CotangentPoint per time
    H_values: np.ndarray              # raw-H along the path
    relative_drift: float
    tolerance: float
    kind: str


@dataclass(frozen=True)
class VarietySample:
    jet: GeometryJet = field(repr=False)
    angles: np.ndarray
    radii: np.ndarray                 # r(theta)
    weights: np.ndarray               # arc-length measure weights
    kappa_tilde: np.ndarray
    covectors: np.ndarray             # (m, d-1) chart covectors xi(theta)
    degenerate: bool
    excluded: np.ndarray              # bool mask of excluded (near-zero) nodes


# ---------------------------------------------------------------------------
# Symbol and Hamiltonian


def _symbol_pieces(jet: GeometryJet, xi):
    xi = np.asarray(xi, dtype=float)
    gixi = jet.metric_inverse @ xi
    norm_sq = float(xi @ gixi)
    if norm_sq <= 0.0:
        raise SymbolError("covector must be nonzero")
    quad = float(gixi @ jet.second_fundamental @ gixi)
    return xi, gixi, norm_sq, quad


def np_symbol(jet: GeometryJet, xi) -> float:
    """General-coordinate principal symbol of K* at (jet, xi)."""
    d = len(jet.position)
    _, _, norm_sq, quad = _symbol_pieces(jet, xi)
    norm = math.sqrt(norm_sq)
    return (d - 1) * jet.mean_curvature / norm - quad / norm ** 3


def _dir_symbol_range(jet: GeometryJet, n_angles: int = 64):
    """Min and max of |symbol| over unit-g covector directions."""
    vals, vecs = scipy.linalg.eigh(jet.second_fundamental, jet.metric)
    thetas = 2.0 * np.pi * np.arange(n_angles) / n_angles
    p = np.empty(n_angles)
    for i, t in enumerate(thetas):
        vec = math.cos(t) * vecs[:, 0] + math.sin(t) * vecs[:, 1]
        xi = jet.metric @ vec
        p[i] = np_symbol(jet, xi)
    return float(np.min(np.abs(p))), float(np.max(np.abs(p)))


def hamiltonian(jet: GeometryJet, xi, kind: str = "raw") -> float:
    """H = p^2 (raw), 1 - exp(-H) (rho), or arctan(H) (arctan)."""
    if kind not in HAMILTONIAN_KINDS:
        raise SymbolError(f"unknown Hamiltonian kind {kind!r}")
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        if kind != "arctan":
            raise SymbolError("raw/rho Hamiltonian undefined at xi = 0")
        # H -> +inf along any direction with nonzero symbol; the limit exists
        # only when the symbol is bounded away from zero on the fiber sphere.
        pmin, pmax = _dir_symbol_range(jet)
        if pmin < 1e-10 * max(pmax, 1.0):
            raise SymbolError("arctan limit at xi = 0 is singular: the symbol "
                              "vanishes along some direction")
        return 0.5 * math.pi
    h = np_symbol(jet, xi) ** 2
    if kind == "raw":
        return h
    if kind == "rho":
        return 1.0 - math.exp(-h)
    return math.atan(h)


def _chain_factor(h_raw: float, kind: str) -> float:
    if kind == "raw":
        return 1.0
    if kind == "rho":
        return math.exp(-h_raw)
    return 1.0 / (1.0 + h_raw ** 2)


def _raw_xi_gradient(jet: GeometryJet, xi):
    """Analytic fiber gradient of H = p^2 via the quotient pieces."""
    xi, gixi, norm_sq, quad = _symbol_pieces(jet, xi)
    d = len(jet.position)
    norm = math.sqrt(norm_sq)
    p = (d - 1) * jet.mean_curvature / norm - quad / norm ** 3
    dnorm_sq = 2.0 * gixi
    dquad = 2.0 * (jet.metric_inverse @ (jet.second_fundamental @ gixi))
    dp = (-(d - 1) * jet.mean_curvature / (2.0 * norm ** 3) * dnorm_sq
          - dquad / norm ** 3
          + 1.5 * quad / norm ** 5 * dnorm_sq)
    return p, 2.0 * p * dp


def _raw_h_at(surface: Surface, chart_id: int, u, xi) -> float:
    jet = surface.jet(ChartPoint(chart_id, np.asarray(u, dtype=float)))
    return np_symbol(jet, xi) ** 2


def hamiltonian_gradient(surface: Surface, pt: CotangentPoint,
                         kind: str = "raw"):
    """(d_x H, d_xi H) in chart coordinates.

    The fiber gradient is analytic; the base gradient uses once-Richardson-
    extrapolated central differences of the jet fields (step 1e-5 x chart
    span).  For the regularized kinds both components are multiplied by the
    chain factor rho'(H) / (1 + H^2)^{-1}.
    """
    if kind not in HAMILTONIAN_KINDS:
        raise SymbolError(f"unknown Hamiltonian kind {kind!r}")
    jet = surface.jet(pt.base)
    h_raw, dxi = _raw_xi_gradient(jet, pt.xi)
    h_raw = h_raw ** 2
    if h_raw < 1e-8:
        raise FlowError("Hamiltonian nearly singular (H < 1e-8); the flow "
                        "approaches the characteristic zero set")
    span = math.pi
    step = 1e-5 * span
    dx = np.empty(len(pt.base.u))
    u0 = np.asarray(pt.base.u, dtype=float)
    for i in range(len(u0)):
        e = np.zeros_like(u0)
        e[i] = 1.0
        diffs = []
        for h in (step, 0.5 * step):
            fp = _raw_h_at(surface, pt.base.chart_id, u0 + h * e, pt.xi)
            fm = _raw_h_at(surface, pt.base.chart_id, u0 - h * e, pt.xi)
            diffs.append((fp - fm) / (2.0 * h))
        dx[i] = (4.0 * diffs[1] - diffs[0]) / 3.0
    factor = _chain_factor(h_raw, kind)
    return factor * dx, factor * dxi


# ---------------------------------------------------------------------------
# Flow integration

_CHART_SWITCH = 0.45        # switch charts when |cos(theta)| exceeds 1 - this


def _transfer_covector(surface: Surface, state, chart_id: int):
    """Re-express (u, xi) in the chart best suited to the current position."""
    u, xi = state[:2], state[2:]
    xhat, _, _ = _sphere_chart(u, chart_id)
    new_chart = best_chart(xhat)
    if new_chart == chart_id:
        return state, chart_id
    jet_a = surface.jet(ChartPoint(chart_id, u))
    u_new = _chart_coords(xhat, new_chart)
    jet_b = surface.jet(ChartPoint(new_chart, u_new))
    ta, tb = jet_a.tangents, jet_b.tangents
    # Velocities map by m = (tb^T tb)^{-1} tb^T ta; covectors by m^{-T}.
    m = np.linalg.solve(tb.T @ tb, tb.T @ ta)
    xi_new = np.linalg.solve(m.T, xi)
    return np.concatenate([u_new, xi_new]), new_chart


def integrate_flow(surface: Surface, init: CotangentPoint, kind: str,
                   T: float, tol: float) -> Trajectory:
    """Hamiltonian flow x' = dH/dxi, xi' = -dH/dx over [0, T].

    Adaptive RK45 with chart switching near the coordinate poles and a raw-H
    drift monitor; aborts when the relative drift exceeds 100 x tol.
    """
    if surface.ambient_dim != 3:
        raise FlowError("the principal symbol vanishes identically in d=2; "
                        "no nontrivial flow exists")
    if kind not in HAMILTONIAN_KINDS:
        raise SymbolError(f"unknown Hamiltonian kind {kind!r}")
    xi0 = np.asarray(init.xi, dtype=float)
    if not np.any(xi0):
        raise SymbolError("flow initialization requires xi != 0")

    h0 = hamiltonian(surface.jet(init.base), xi0, "raw")

    times = [0.0]
    states = [CotangentPoint(ChartPoint(init.base.chart_id,
                                        np.asarray(init.base.u, float)), xi0)]
    h_vals = [h0]

    chart_id = init.base.chart_id
    y = np.concatenate([np.asarray(init.base.u, float), xi0])
    t_now = 0.0

    def rhs(t, yv):
        pt = CotangentPoint(ChartPoint(chart_id, yv[:2]), yv[2:])
        dx, dxi = hamiltonian_gradient(surface, pt, kind)
        return np.concatenate([dxi, -dx])

    def near_pole(t, yv):
        return math.sin(yv[0]) - _CHART_SWITCH

    near_pole.terminal = True
    near_pole.direction = -1.0

    n_out = max(64, int(8 * T))
    t_grid = np.linspace(0.0, T, n_out + 1)
    while t_now < T:
        t_eval = t_grid[(t_grid > t_now + 1e-14) & (t_grid <= T)]
        sol = scipy.integrate.solve_ivp(
            rhs, (t_now, T), y, method="RK45", rtol=tol / 100.0,
            atol=tol / 100.0, events=near_pole, t_eval=t_eval, dense_output=True)
        if not sol.success and sol.status != 1:
            raise FlowError(f"flow integration failed: {sol.message}")
        for tk, yk in zip(sol.t, sol.y.T):
            times.append(tk)
            pt = CotangentPoint(ChartPoint(chart_id, yk[:2].copy()), yk[2:].copy())
            states.append(pt)
            h_vals.append(hamiltonian(surface.jet(pt.base), pt.xi, "raw"))
        if sol.status == 1:  # chart-switch event
            t_now = float(sol.t_events[0][0])
            y_event = sol.sol(t_now)
            y, chart_id = _transfer_covector(surface, y_event, chart_id)
            if math.sin(y[0]) <= _CHART_SWITCH:
                raise FlowError("trajectory unreachable by either chart")
        else:
            t_now = T
            y = sol.y[:, -1] if sol.y.shape[1] else y
        drift = max(abs(h - h0) for h in h_vals) / abs(h0)
        if drift > 100.0 * tol:
            raise FlowError(f"Hamiltonian drift {drift:.3e} exceeds "
                            f"100 x tol = {100 * tol:.3e}; aborting")
    h_arr = np.asarray(h_vals)
    drift = float(np.max(np.abs(h_arr - h0)) / abs(h0))
    return Trajectory(times=np.asarray(times), states=states, H_values=h_arr,
                      relative_drift=drift, tolerance=tol, kind=kind)


def birkhoff_average(surface: Surface, observable, init: CotangentPoint,
                     T: float, n_checkpoints: int, kind: str = "raw",
                     tol: float = 1e-8):
    """Partial time-averages (1/T_k) int_0^{T_k} a(flow(t)) dt.

    Returns (checkpoint_times, partial_averages, cauchy_differences); the
    observable is integrated as an extra ODE component alongside the flow.
    """
    if n_checkpoints < 1:
        raise ValueError("need at least one checkpoint")
    traj = integrate_flow(surface, init, kind, T, tol)
    a_vals = np.array([observable(pt) for pt in traj.states])
    cum = scipy.integrate.cumulative_trapezoid(a_vals, traj.times, initial=0.0)
    t_checks = T * np.arange(1, n_checkpoints + 1) / n_checkpoints
    partial = np.interp(t_checks, traj.times, cum) / t_checks
    cauchy = np.abs(np.diff(partial))
    return t_checks, partial, cauchy


# ---------------------------------------------------------------------------
# Characteristic variety


def kappa_tilde(kappas) -> np.ndarray:
    """ktilde_i = (sum of all principal curvatures) - kappa_i."""
    kappas = np.asarray(kappas, dtype=float)
    return np.sum(kappas) - kappas


def variety_sample(jet: GeometryJet, angular_res: int) -> VarietySample:
    """Sample {H(p, .) = 1} on a uniform fiber-angle grid (d = 3).

    In the principal frame the variety is the polar curve
    r(theta) = ktilde_1 cos^2 + ktilde_2 sin^2 with arc-length measure
    sqrt(r^2 + r'^2) dtheta; covectors are returned in chart coordinates.
    """
    if len(jet.position) != 3:
        raise SymbolError("variety sampling requires an ambient dimension of 3")
    if angular_res < 8:
        raise ValueError("angular resolution must be at least 8")
    kap, frame = scipy.linalg.eigh(jet.second_fundamental, jet.metric)
    ktil = kappa_tilde(kap)
    theta = 2.0 * np.pi * np.arange(angular_res) / angular_res
    c, s = np.cos(theta), np.sin(theta)
    r = ktil[0] * c ** 2 + ktil[1] * s ** 2
    rprime = (ktil[1] - ktil[0]) * 2.0 * s * c
    dtheta = 2.0 * np.pi / angular_res
    weights = np.sqrt(r ** 2 + rprime ** 2) * dtheta
    # Covector of g-unit direction omega is g.(frame @ omega), scaled by r.
    dirs = frame @ np.vstack([c, s])                  # (2, m) tangent coords
    covectors = (r[None, :] * (jet.metric @ dirs)).T
    scale = float(np.max(np.abs(ktil))) or 1.0
    excluded = np.abs(r) < 1e-10 * scale
    return VarietySample(jet=jet, angles=theta, radii=r, weights=weights,
                         kappa_tilde=ktil, covectors=covectors,
                         degenerate=bool(np.any(excluded)), excluded=excluded)


def weighted_variety_volume(vs: VarietySample, alpha: float) -> float:
    """V_alpha = integral |r|^(1+2 alpha) sqrt(r^2 + r'^2) dtheta."""
    if vs.degenerate:
        if alpha <= -0.5:
            raise VarietyDegeneracyError(
                "r(omega) has zeros; the volume integral diverges for "
                "alpha <= -1/2")
        warnings.warn("variety closure touches the zero section; excluding "
                      f"{int(np.sum(vs.excluded))} angular nodes",
                      RuntimeWarning)
    mask = ~vs.excluded
    return float(np.sum(np.abs(vs.radii[mask]) ** (1.0 + 2.0 * alpha)
                        * vs.weights[mask]))


def F_alpha(kappas, alpha: float, variant: str = "corrected",
            angular_res: int = 512, paper_measure: bool = False) -> float:
    """Curvature functional F_alpha on the fiber circle (d = 3).

    variant="paper" uses exponent d-1+2*alpha on |r(omega)| (the verbatim
    formula); variant="corrected" uses d-2+2*alpha, which restores the
    homogeneity scaling and the umbilic identity F = V.  The measure is
    sqrt(sum ktilde_i^2 w_i^2) d omega; paper_measure=True substitutes the
    alternative display sqrt(4 (sum ktilde^2 w^2)^2 - 3 (sum ktilde w^2)),
    kept only for documentation (it fails the scaling sanity check).
    """
    kappas = np.asarray(kappas, dtype=float)
    d = len(kappas) + 1
    if d != 3:
        raise SymbolError("F_alpha quadrature is implemented for d = 3")
    if variant == "paper":
        expo = d - 1 + 2.0 * alpha
    elif variant == "corrected":
        expo = d - 2 + 2.0 * alpha
    else:
        raise ValueError("variant must be 'paper' or 'corrected'")
    ktil = kappa_tilde(kappas)
    theta = 2.0 * np.pi * np.arange(angular_res) / angular_res
    w1, w2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    r = ktil[0] * w1 + ktil[1] * w2
    quad = ktil[0] ** 2 * w1 + ktil[1] ** 2 * w2
    if paper_measure:
        inside = 4.0 * quad ** 2 - 3.0 * r * (w1 + w2)
        measure = np.sqrt(np.maximum(inside, 0.0))
    else:
        measure = np.sqrt(quad)
    dtheta = 2.0 * np.pi / angular_res
    return float(np.sum(np.abs(r) ** expo * measure) * dtheta)


# ---------------------------------------------------------------------------
# Exports


def export_trajectory_csv(traj: Trajectory, path: str) -> None:
    """CSV with columns (t, u1, u2, xi1, xi2, H)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u1", "u2", "xi1", "xi2", "H"])
        for t, pt, h in zip(traj.times, traj.states, traj.H_values):
            writer.writerow(["%.17g" % t, "%.17g" % pt.base.u[0],
                             "%.17g" % pt.base.u[1], "%.17g" % pt.xi[0],
                             "%.17g" % pt.xi[1], "%.17g" % h])


def export_variety_csv(vs: VarietySample, path: str) -> None:
    """CSV with columns (theta, r, weight)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "r", "weight"])
        for t, r, w in zip(vs.angles, vs.radii, vs.weights):
            writer.writerow(["%.17g" % t, "%.17g" % r, "%.17g" % w])
