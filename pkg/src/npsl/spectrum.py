"""Symmetrized eigendecomposition of the discretized NP operator.

The adjoint NP operator K* is self-adjoint in the inner product
``(phi, psi) -> -<S phi, psi>`` induced by the single-layer operator.  On the
quadrature node set this inner product has Gram matrix ``G = -(W S)`` (W the
diagonal quadrature weights), which is symmetric by construction of the
assembly and positive semi-definite in d=3.  The product quadrature gives G a
structural near-null tail (its rank is set by the spherical-harmonic degree of
the underlying rule, roughly half the node count), so all spectral
computations are carried out on the retained subspace of G-eigenvalues above
``RANK_CUTOFF`` times the largest.

In d=2 the logarithmic kernel makes S indefinite on constants; the inner
product is restricted to the mean-zero subspace (which K* preserves, since
K[1] = 1/2), and the lambda = 1/2 equilibrium eigenpair is recovered from the
plain nonsymmetric eigenproblem and pinned separately.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import AssemblyError, DenseOperator
from .geometry import NodeSet, Surface

RANK_CUTOFF = 1e-12
# Floor for (-2S) eigenvalues before taking powers, relative to the largest.
# The genuine single-layer spectrum decays only like 1/degree (well above this)
# while the structural quadrature tail sits at roundoff; the floor bounds the
# condition number so inverse powers compose to the identity within roundoff.
POWER_FLOOR = 1e-6


class SpectralError(RuntimeError):
    """Raised when symmetrization or a fractional power cannot proceed."""


@dataclass(frozen=True)
class EigenSystem:
    """NP eigenpairs sorted by decreasing |lambda|.

    eigenvalues: shape (M,), real, in (-1/2, 1/2].
    eigenfunctions: shape (N, M); column i is phi_i sampled at the nodes,
        normalized to unit L2(dsigma) norm.
    weights: c_i = (-<S phi_i, phi_i>)^{-1}, positive in d=3.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    weights: np.ndarray
    nodes: NodeSet = field(repr=False)

    def __len__(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class SpectralBand:
    """Selects eigenpairs by index range or by an eigenvalue-squared window.

    index_range = (i1, i2): zero-based inclusive positions in the |lambda|-
    sorted spectrum.  lambda_sq_range = (r, s): all i with r <= lambda_i^2 <= s.
    Exactly one selector must be given.
    """

    index_range: tuple | None = None
    lambda_sq_range: tuple | None = None

    def indices(self, es: "EigenSystem") -> np.ndarray:
        if (self.index_range is None) == (self.lambda_sq_range is None):
            raise ValueError("specify exactly one of index_range / "
                             "lambda_sq_range")
        if self.index_range is not None:
            i1, i2 = self.index_range
            if not 0 <= i1 <= i2 < len(es):
                raise ValueError("index range outside the spectrum")
            return np.arange(i1, i2 + 1)
        r, s = self.lambda_sq_range
        lam_sq = es.eigenvalues ** 2
        sel = np.nonzero((lam_sq >= r) & (lam_sq <= s))[0]
        if len(sel) == 0:
            raise ValueError("empty spectral band")
        return sel


@dataclass(frozen=True)
class FractionalOperator:
    """A real power of the positive operator (-2S), used as |D|^{-alpha}."""

    exponent: float
    matrix: np.ndarray
    nodes: NodeSet = field(repr=False)

    def __matmul__(self, other):
        return self.matrix @ other


def _retained_subspace(gram: np.ndarray):
    q, u = scipy.linalg.eigh(gram)
    keep = q > RANK_CUTOFF * q[-1]
    if q[-1] <= 0 or not np.any(keep):
        raise SpectralError(
            "inner-product Gram matrix is not positive on any subspace")
    return q[keep], u[:, keep]


def _eigensystem_from_subspace(kstar, gram, xi_basis, weights):
    """Diagonalize K* on a retained subspace, G-orthonormal output.

    Works in the W^{1/2}-conjugated coordinates xi = W^{1/2} phi, where the
    Gram becomes W^{-1/2} G W^{-1/2}; the retained eigenspace of that matrix
    pulls back (via W^{-1/2}) to the range of S in density space, which is the
    subspace the discrete operators represent faithfully.  xi_basis restricts
    the xi-space (identity in d=3, the mean-zero complement in d=2).
    """
    sqw = np.sqrt(weights)
    gram_xi = gram / sqw[:, None] / sqw[None, :]
    g_sub = xi_basis.T @ gram_xi @ xi_basis
    g_sub = 0.5 * (g_sub + g_sub.T)
    q, u = _retained_subspace(g_sub)
    white = (xi_basis @ (u / np.sqrt(q)[None, :])) / sqw[:, None]
    m = white.T @ gram @ (kstar @ white)              # G-orthonormal columns
    m = 0.5 * (m + m.T)
    lam, y = scipy.linalg.eigh(m)
    phi = white @ y                                   # G-orthonormal eigvecs
    # L2(dsigma)-normalize; the squared L2 norm of a G-orthonormal vector is
    # exactly the weight c_i = (-<S phi, phi>)^{-1} after renormalization.
    l2sq = np.einsum("ij,ij->j", phi, weights[:, None] * phi)
    phi = phi / np.sqrt(l2sq)[None, :]
    return lam, phi, l2sq


def symmetrized_eigensystem(kstar: DenseOperator, s: DenseOperator) -> EigenSystem:
    """Eigendecomposition of K* in the -<S.,.> inner product.

    Returns eigenpairs sorted by decreasing |lambda| with L2-normalized node
    eigenvectors and the H^{-1/2} weights c_i.
    """
    if kstar.nodes is not s.nodes and len(kstar.nodes) != len(s.nodes):
        raise AssemblyError("K* and S must share a node set")
    nodes = kstar.nodes
    w = nodes.weights
    gram = -(w[:, None] * s.matrix)
    gram = 0.5 * (gram + gram.T)
    n = len(nodes)
    if nodes.positions.shape[1] == 3:
        lam, phi, l2sq = _eigensystem_from_subspace(
            kstar.matrix, gram, np.eye(n), w)
        cvals = l2sq
    else:
        # d=2: restrict to the mean-zero subspace where -S is positive.  The
        # constraint <phi, 1>_W = 0 reads sqrt(w) . xi = 0 in xi-coordinates.
        basis = scipy.linalg.null_space(np.sqrt(w)[None, :])
        lam, phi, l2sq = _eigensystem_from_subspace(
            kstar.matrix, gram, basis, w)
        cvals = l2sq
        # Pin the lambda = 1/2 equilibrium eigenpair separately.
        ev, vecs = scipy.linalg.eig(kstar.matrix)
        idx = int(np.argmin(np.abs(ev - 0.5)))
        psi = np.real(vecs[:, idx])
        psi = psi / np.sqrt(psi @ (w * psi))
        c_half = -(psi @ (w * (s.matrix @ psi)))
        lam = np.concatenate([lam, [float(np.real(ev[idx]))]])
        phi = np.column_stack([phi, psi])
        cvals = np.concatenate([cvals, [1.0 / c_half]])
    order = np.argsort(-np.abs(lam), kind="stable")
    return EigenSystem(eigenvalues=lam[order],
                       eigenfunctions=phi[:, order],
                       weights=np.asarray(cvals)[order],
                       nodes=nodes)


def hminus_half_weights(es: EigenSystem, s: DenseOperator) -> np.ndarray:
    """c_i = (-<S phi_i, phi_i>)^{-1} by weighted quadrature.

    Recomputed directly from S; agrees with es.weights up to roundoff and is
    invariant under rescaling of phi_i before normalization.
    """
    w = es.nodes.weights
    sphi = s.matrix @ es.eigenfunctions
    norms = -np.einsum("ij,ij->j", es.eigenfunctions, w[:, None] * sphi)
    if es.nodes.positions.shape[1] == 3 and np.any(norms <= 0):
        raise SpectralError("non-positive H^{-1/2} seminorm in d=3: "
                            "symmetrization or sign error")
    return 1.0 / norms


def fractional_D_power(s: DenseOperator, alpha: float) -> FractionalOperator:
    """The discrete |D|^alpha, realized as the SPD power (-2S)^{-alpha}.

    Built from the eigendecomposition of W^{1/2}(-2S)W^{-1/2} (symmetric by
    construction); eigenvalues are floored at POWER_FLOOR times the largest so
    the structural near-null tail of the quadrature cannot blow up under
    negative exponents.  Powers from the same S compose exactly.
    """
    nodes = s.nodes
    w = nodes.weights
    sqw = np.sqrt(w)
    b = (sqw[:, None] * (-2.0 * s.matrix)) / sqw[None, :]
    b = 0.5 * (b + b.T)
    q, u = scipy.linalg.eigh(b)
    if q[-1] <= 0:
        raise SpectralError("-2S has no positive spectrum; cannot take powers")
    q = np.maximum(q, POWER_FLOOR * q[-1])
    mat = (u * q**(-alpha)) @ u.T
    mat = (mat / sqw[:, None]) * sqw[None, :]
    if alpha == 0:
        mat = np.eye(len(nodes))
    return FractionalOperator(exponent=alpha, matrix=mat, nodes=nodes)


def plasmonic_constant(lam: float, gamma_m: float) -> float:
    """Invert lambda = (gamma_c + gamma_m) / (2 (gamma_c - gamma_m))."""
    if not -0.5 < lam < 0.5:
        raise ValueError("lambda must lie in (-1/2, 1/2); the map is singular "
                         "at 1/2")
    if gamma_m <= 0:
        raise ValueError("gamma_m must be positive")
    return gamma_m * (2.0 * lam + 1.0) / (2.0 * lam - 1.0)


def _unit_variety_integral(surface: Surface, nodes: NodeSet,
                           n_angles: int = 64) -> float:
    """Quadrature of the squared radial profile over nodes x fiber angles.

    Computes the surface integral of  integral_0^{2pi} r(x, omega)^2 domega
    with r(omega) = ktilde_1 cos^2 + ktilde_2 sin^2 in the principal frame;
    this is (2t) x the phase volume of {H >= t} in d=3.
    """
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    c2, s2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    total = 0.0
    for i in range(len(nodes)):
        jet = nodes.jets[i]
        k1, k2 = jet.principal_curvatures
        kt1, kt2 = k2, k1
        r = kt1 * c2 + kt2 * s2
        total += nodes.weights[i] * np.mean(r ** 2) * 2.0 * np.pi
    return total


def weyl_diagnostic(es: EigenSystem, surface: Surface,
                    index_window: tuple = (20, 200)) -> dict:
    """Eigenvalue-decay slope and phase-volume counting ratio (d=3 only).

    Fits log|lambda_j| against log j over index_window (1-based, inclusive);
    the symbol calculus predicts slope -1/(d-1) = -1/2.  Also reports the
    ratio of the empirical counting function N(t) = #{lambda_j^2 >= t} to the
    classical phase volume (2pi)^{-2} (2t)^{-1} * integral of r^2, evaluated
    at t = lambda_j^2 across the window; the h-power normalization of that
    ratio is reported, not asserted.
    """
    nodes = es.nodes
    if nodes.positions.shape[1] != 3:
        raise SpectralError("weyl_diagnostic requires an ambient dimension of 3")
    if len(es) < 200:
        raise SpectralError("need at least 200 converged eigenvalues")
    j1, j2 = index_window
    if j2 > len(es):
        raise SpectralError("index window exceeds available spectrum")
    if j2 > 0.6 * len(es):
        warnings.warn("index window reaches into the unconverged quadrature "
                      "tail; slope may be biased", RuntimeWarning)
    idx = np.arange(j1, j2 + 1)
    lam = np.abs(es.eigenvalues[idx - 1])
    slope, intercept = np.polyfit(np.log(idx), np.log(lam), 1)
    r2integral = _unit_variety_integral(surface, nodes)
    lam_sq = es.eigenvalues ** 2
    ratios = []
    for j in range(j1, j2 + 1, max(1, (j2 - j1) // 16)):
        t = lam_sq[j - 1]
        count = float(np.sum(lam_sq >= t))
        phase_vol = r2integral / (2.0 * t * (2.0 * np.pi) ** 2)
        ratios.append(count / phase_vol)
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "index_window": (int(j1), int(j2)),
        "phase_volume_ratio_median": float(np.median(ratios)),
        "phase_volume_ratios": [float(r) for r in ratios],
    }


def converged_count(coarse: EigenSystem, fine: EigenSystem,
                    rtol: float = 0.01) -> int:
    """Leading eigenvalue count stable under node refinement.

    Returns the largest m such that the first m eigenvalues (sorted by
    decreasing magnitude) agree between the two resolutions to relative
    tolerance rtol.
    """
    m = min(len(coarse), len(fine))
    lam_c, lam_f = coarse.eigenvalues[:m], fine.eigenvalues[:m]
    denom = np.maximum(np.abs(lam_f), 1e-300)
    ok = np.abs(lam_c - lam_f) / denom < rtol
    bad = np.nonzero(~ok)[0]
    return int(bad[0]) if len(bad) else m


def multiplicity_groups(eigenvalues: np.ndarray, atol: float = 1e-4) -> np.ndarray:
    """Group index per eigenvalue: consecutive values within atol share one."""
    groups = np.zeros(len(eigenvalues), dtype=int)
    for i in range(1, len(eigenvalues)):
        same = abs(eigenvalues[i] - eigenvalues[i - 1]) <= atol
        groups[i] = groups[i - 1] + (0 if same else 1)
    return groups


def export_spectrum_csv(es: EigenSystem, path: str, atol: float = 1e-4) -> None:
    """CSV with columns (index, lambda, c_weight, multiplicity_group)."""
    groups = multiplicity_groups(es.eigenvalues, atol)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda", "c_weight", "multiplicity_group"])
        for i in range(len(es)):
            writer.writerow([i, "%.17g" % es.eigenvalues[i],
                             "%.17g" % es.weights[i], groups[i]])


def export_eigenfunctions(es: EigenSystem, path_base: str) -> None:
    """Binary node-value matrix (.npy) plus a JSON header sidecar."""
    data_path = path_base + ".npy"
    np.save(data_path, es.eigenfunctions)
    with open(data_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    header = {
        "format": "npy",
        "shape": list(es.eigenfunctions.shape),
        "eigenvalues": [float(v) for v in es.eigenvalues],
        "sha256": digest,
    }
    with open(path_base + ".json", "w") as fh:
        json.dump(header, fh, indent=2)
