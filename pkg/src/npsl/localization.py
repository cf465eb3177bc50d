"""Bump-function localization functionals and the ergodicity variance check.

The localized band mass

    M(p) = sum_{i in band} c_i * integral chi_{p,delta} ||D|^alpha phi_i|^2

concentrates, band by band, in proportion to the weighted volume of the
characteristic variety {H(p,.) = 1}; localization_ratio compares the
empirical mass ratio of two surface points with that variety-volume
prediction.  qe_variance measures how far normalized band matrix elements of
a smooth observable deviate from the variety-weighted surface average, a
quantitative (non-)equidistribution diagnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import DenseOperator
from .geometry import NodeSet, Surface
from .spectrum import EigenSystem, FractionalOperator, SpectralBand
from .symbol_flow import variety_sample, weighted_variety_volume

MIN_SUPPORT_NODES = 12


class LocalizationError(RuntimeError):
    """Raised for degenerate bumps or invalid band selections."""


@dataclass(frozen=True)
class BumpSpec:
    center: np.ndarray      # ambient point on (or near) the surface
    radius: float           # chordal support radius delta

    def __post_init__(self):
        if self.radius <= 0:
            raise LocalizationError("bump radius must be positive")


@dataclass(frozen=True)
class LocalizationReport:
    band: SpectralBand
    alpha: float
    delta: float
    p: np.ndarray
    q: np.ndarray
    empirical_ratio: float
    predicted_ratio: float
    mass_p: float
    mass_q: float
    contributions_p: np.ndarray = field(repr=False)
    contributions_q: np.ndarray = field(repr=False)


def bump_function(surface: Surface, nodes: NodeSet, spec: BumpSpec) -> np.ndarray:
    """Node samples of the normalized bump chi(x) at chordal distance < delta.

    chi(x) = c exp(-1 / (1 - (|x - p| / delta)^2)) inside the support, zero
    outside, with c fixed so the quadrature integral is exactly 1.
    """
    center = np.asarray(spec.center, dtype=float)
    dist = np.linalg.norm(nodes.positions - center[None, :], axis=1)
    inside = dist < spec.radius
    if int(np.sum(inside)) < MIN_SUPPORT_NODES:
        raise LocalizationError(
            f"bump support contains {int(np.sum(inside))} nodes "
            f"(< {MIN_SUPPORT_NODES}); delta too small for this resolution")
    vals = np.zeros(len(nodes))
    ratio_sq = (dist[inside] / spec.radius) ** 2
    vals[inside] = np.exp(-1.0 / (1.0 - ratio_sq))
    total = float(vals @ nodes.weights)
    return vals / total


def band_local_mass(es: EigenSystem, band: SpectralBand, alpha: float,
                    bump: np.ndarray, fracD: FractionalOperator):
    """Weighted localized mass of a spectral band and its per-i contributions.

    Returns (mass, contributions) with
    contribution_i = c_i * sum_x w_x bump(x) |(|D|^alpha phi_i)(x)|^2.
    """
    if abs(fracD.exponent - alpha) > 1e-12:
        raise LocalizationError("fractional operator exponent does not match "
                                "alpha")
    idx = band.indices(es)
    w = es.nodes.weights
    psi = fracD.matrix @ es.eigenfunctions[:, idx]
    contributions = es.weights[idx] * np.einsum(
        "x,xj->j", w * bump, np.abs(psi) ** 2)
    return float(np.sum(contributions)), contributions


def localization_ratio(es: EigenSystem, surface: Surface, p, q,
                       band: SpectralBand, alpha: float, delta: float,
                       fracD: FractionalOperator,
                       angular_res: int = 256) -> LocalizationReport:
    """Empirical vs variety-predicted localized-mass ratio of points p and q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    nodes = es.nodes
    mass = {}
    contribs = {}
    for key, point in (("p", p), ("q", q)):
        bump = bump_function(surface, nodes, BumpSpec(point, delta))
        mass[key], contribs[key] = band_local_mass(es, band, alpha, bump, fracD)
    predicted = 1.0
    vols = {}
    for key, point in (("p", p), ("q", q)):
        jet = surface.jet(surface.chart_point(point))
        vs = variety_sample(jet, angular_res)
        if vs.degenerate:
            raise LocalizationError(
                f"characteristic variety degenerates at point {key}; "
                "Assumption (A) fails there")
        vols[key] = weighted_variety_volume(vs, alpha)
    predicted = vols["p"] / vols["q"]
    if mass["q"] <= 0:
        raise LocalizationError("vanishing localized mass at q")
    return LocalizationReport(band=band, alpha=alpha, delta=delta, p=p, q=q,
                              empirical_ratio=mass["p"] / mass["q"],
                              predicted_ratio=predicted,
                              mass_p=mass["p"], mass_q=mass["q"],
                              contributions_p=contribs["p"],
                              contributions_q=contribs["q"])


def _half_power_of_minus_s(s: DenseOperator) -> np.ndarray:
    """(-S)^{1/2} in the weighted inner product; (-S)^{1/2}phi_i has squared
    L2 norm exactly c_i^{-1} for S-orthonormalized eigenfunctions."""
    w = s.nodes.weights
    sqw = np.sqrt(w)
    b = (sqw[:, None] * (-s.matrix)) / sqw[None, :]
    b = 0.5 * (b + b.T)
    q, u = scipy.linalg.eigh(b)
    q = np.maximum(q, 0.0)
    half = (u * np.sqrt(q)) @ u.T
    return (half / sqw[:, None]) * sqw[None, :]


def variety_weight(surface: Surface, nodes: NodeSet,
                   angular_res: int = 64) -> np.ndarray:
    """Node samples of w(x) = |{H(x,.) = 1}| normalized to quadrature mass 1."""
    vals = np.empty(len(nodes))
    for i in range(len(nodes)):
        vs = variety_sample(nodes.jets[i], angular_res)
        vals[i] = float(np.sum(vs.weights[~vs.excluded]))
    return vals / float(vals @ nodes.weights)


def qe_variance(es: EigenSystem, band: SpectralBand, observable,
                surface: Surface, s: DenseOperator) -> dict:
    """Band variance of normalized matrix elements against the variety mean.

    Matrix elements m_i = c_i <observable phihat_i, phihat_i>_{L2} with
    phihat_i = (-S)^{1/2} phi_i (so that <phihat_i, phihat_i> = c_i^{-1}
    exactly); m_pred is the observable averaged against the normalized
    variety-volume weight w(x).  Returns the variance, the band-mean matrix
    element, m_pred, and the per-i elements.
    """
    observable = np.asarray(observable, dtype=float)
    idx = band.indices(es)
    nodes = es.nodes
    w = nodes.weights
    half = _half_power_of_minus_s(s)
    phihat = half @ es.eigenfunctions[:, idx]
    elements = es.weights[idx] * np.einsum(
        "x,xj->j", w * observable, phihat ** 2)
    weight = variety_weight(surface, nodes)
    m_pred = float((observable * weight) @ w)
    variance = float(np.mean(np.abs(elements - m_pred) ** 2))
    return {
        "variance": variance,
        "band_mean": float(np.mean(elements)),
        "m_pred": m_pred,
        "elements": elements,
    }


def export_localization_json(report: LocalizationReport, es: EigenSystem,
                             surface: Surface, path: str) -> None:
    """JSON export of a localization report."""
    idx = report.band.indices(es)
    lam = es.eigenvalues[idx]
    payload = {
        "surface": surface.spec.as_config(),
        "band": {
            "lambda_min": float(np.min(lam)),
            "lambda_max": float(np.max(lam)),
            "count": int(len(idx)),
        },
        "alpha": report.alpha,
        "delta": report.delta,
        "p": [float(v) for v in report.p],
        "q": [float(v) for v in report.q],
        "empirical_ratio": report.empirical_ratio,
        "predicted_ratio": report.predicted_ratio,
        "contributions": [
            {"index": int(i), "lambda": float(es.eigenvalues[i]),
             "p": float(cp), "q": float(cq)}
            for i, cp, cq in zip(idx, report.contributions_p,
                                 report.contributions_q)
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
