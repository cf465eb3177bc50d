"""Quasi-static Helmholtz transmission: resonance search and scattering.

The transmission problem with magnetic contrast (mu0, mu1) and wavenumbers
k0 = omega sqrt(eps0 mu0), k1 = omega sqrt(eps1 mu1) resonates when

    M(mu1, omega) = 1/2 (mu0 I + mu1 X) + mu0 K*_{k0} - mu1 K*_{k1} X,
    X = (S_{k1})^{-1} S_{k0},

is singular.  The flux-matching coefficients are mu0 and mu1 themselves,
which places the static (omega -> 0) singularity at the plasmonic
condition lambda(mu0, mu1) = (mu0 + mu1) / (2 (mu1 - mu0)) = lambda_i on
the NP spectrum — e.g. the Froehlich value mu1 = -2 mu0 for the sphere's
lambda = 1/6.  The resonant mu1(omega) drifts from its static value at
rate O(omega^2); drift_slope measures that rate against the discrete
static eigenvalue, which the zero-frequency search recovers exactly.
"""

from __future__ import annotations

import cmath
import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import DenseOperator, KernelKind, assemble, evaluate_layer_potential
from .geometry import NodeSet, Surface
from .spectrum import _retained_subspace, symmetrized_eigensystem

QUASI_STATIC_CEILING = 0.5
CONDITION_LIMIT = 1e12


class HelmholtzError(RuntimeError):
    """Raised for invalid media, ill-conditioning, or failed searches."""


def _branch_sqrt(z: complex) -> complex:
    """Square root with nonnegative imaginary part."""
    r = cmath.sqrt(z)
    return -r if r.imag < 0 or (r.imag == 0 and r.real < 0) else r


@dataclass(frozen=True)
class MediumParams:
    mu0: float
    eps0: float
    mu1: complex
    eps1: complex
    omega: float

    def __post_init__(self):
        if self.mu0 <= 0 or self.eps0 <= 0:
            raise HelmholtzError("exterior medium must have positive mu0, eps0")
        if self.omega < 0:
            raise HelmholtzError("frequency must be nonnegative")
        if self.mu1 == 0:
            raise HelmholtzError("mu1 must be nonzero")

    @property
    def k0(self) -> float:
        return self.omega * float(np.sqrt(self.eps0 * self.mu0))

    @property
    def k1(self) -> complex:
        return self.omega * _branch_sqrt(complex(self.eps1) * complex(self.mu1))


def _diameter(nodes: NodeSet) -> float:
    pos = nodes.positions
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def _four_operators(surface: Surface, nodes: NodeSet, params: MediumParams):
    s0 = assemble(surface, nodes, KernelKind("helmholtz_single", params.k0))
    s1 = assemble(surface, nodes, KernelKind("helmholtz_single", params.k1))
    k0 = assemble(surface, nodes, KernelKind("helmholtz_npstar", params.k0))
    k1 = assemble(surface, nodes, KernelKind("helmholtz_npstar", params.k1))
    return s0, s1, k0, k1


def _solve_with_refinement(lu_piv, a_matrix, rhs):
    x = scipy.linalg.lu_solve(lu_piv, rhs)
    x += scipy.linalg.lu_solve(lu_piv, rhs - a_matrix @ x)
    return x


def _resolved_basis(surface: Surface, nodes: NodeSet) -> np.ndarray:
    """Orthonormal basis (whitened coordinates) of the resolved subspace.

    The product quadrature represents the single layer faithfully only on
    the range of the static S matrix (half the nodal degrees of freedom);
    the complement is a quadrature artifact on which S is numerically zero
    and must not be inverted.
    """
    cached = getattr(nodes, "_resolved_basis", None)
    if cached is not None:
        return cached
    s = assemble(surface, nodes, KernelKind("laplace_single")).matrix
    w = nodes.weights
    sqw = np.sqrt(w)
    gram = -(w[:, None] * s)
    gram_white = gram / sqw[:, None] / sqw[None, :]
    gram_white = 0.5 * (gram_white + gram_white.T)
    _, u = _retained_subspace(gram_white)
    nodes._resolved_basis = u
    return u


def _project(matrix: np.ndarray, basis: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Restrict a density-space operator to the resolved subspace."""
    sqw = np.sqrt(w)
    white = (sqw[:, None] * matrix) / sqw[None, :]
    return basis.T @ white @ basis


def resonance_operator(surface: Surface, nodes: NodeSet,
                       params: MediumParams) -> DenseOperator:
    """Assemble M(mu1, omega) on the resolved subspace.

    Raises on mu1 = mu0 (no contrast) and when S_k1 is ill-conditioned on
    that subspace (k1^2 near an interior Dirichlet eigenvalue).
    """
    if surface.ambient_dim != 3:
        raise HelmholtzError("resonance operator implemented for d = 3")
    if complex(params.mu1) == complex(params.mu0):
        raise HelmholtzError("resonance requires magnetic contrast: mu1 != mu0")
    ops = _four_operators(surface, nodes, params)
    m = _resonance_matrix(surface, nodes, params, ops)
    return DenseOperator(matrix=m, nodes=nodes,
                         kernel=KernelKind("helmholtz_npstar", params.k0))


def _resonance_matrix(surface, nodes, params, ops) -> np.ndarray:
    s0, s1, kk0, kk1 = ops
    basis = _resolved_basis(surface, nodes)
    w = nodes.weights
    s0p = _project(s0.matrix, basis, w)
    s1p = _project(s1.matrix, basis, w)
    k0p = _project(kk0.matrix, basis, w)
    k1p = _project(kk1.matrix, basis, w)
    if np.linalg.cond(s1p) > CONDITION_LIMIT:
        raise HelmholtzError(
            "S_k1 is numerically singular (condition > 1e12); k1^2 is too "
            "close to an interior Dirichlet eigenvalue")
    lu = scipy.linalg.lu_factor(s1p)
    x = _solve_with_refinement(lu, s1p, s0p)
    c0, c1 = params.mu0, complex(params.mu1)
    return (0.5 * (c0 * np.eye(x.shape[0]) + c1 * x)
            + c0 * k0p - c1 * (k1p @ x))


def resonance_residual(surface: Surface, nodes: NodeSet,
                       params: MediumParams) -> float:
    """Smallest singular value of the resonance operator."""
    op = resonance_operator(surface, nodes, params)
    return float(scipy.linalg.svdvals(op.matrix)[-1])


def resonance_kernel_count(surface: Surface, nodes: NodeSet,
                           params: MediumParams, rtol: float = 1e-6) -> int:
    """Multiplicity estimate: singular values below rtol x the largest."""
    op = resonance_operator(surface, nodes, params)
    sv = scipy.linalg.svdvals(op.matrix)
    return int(np.sum(sv < rtol * sv[0]))


@dataclass(frozen=True)
class ResonanceResult:
    target_lambda: float
    mu1: complex
    residual: float
    drift: float
    iterations: int
    omega: float


def static_eigenvalue(surface: Surface, nodes: NodeSet,
                      target_lambda: float) -> float:
    """Discrete NP eigenvalue nearest the requested target."""
    s = assemble(surface, nodes, KernelKind("laplace_single"))
    k = assemble(surface, nodes, KernelKind("laplace_npstar"))
    cache = getattr(nodes, "_np_eigenvalues", None)
    if cache is None:
        cache = symmetrized_eigensystem(k, s).eigenvalues
        nodes._np_eigenvalues = cache
    return float(cache[np.argmin(np.abs(cache - target_lambda))])


def lambda_of_media(mu0, mu1) -> complex:
    """Plasmonic eigenvalue map: (mu0 + mu1) / (2 (mu1 - mu0))."""
    return (mu0 + mu1) / (2.0 * (mu1 - mu0))


def static_mu1(mu0: float, lam: float) -> float:
    """Static resonance root: lambda(mu0^{-1}, mu1^{-1}) = lam."""
    if abs(lam - 0.5) < 1e-14:
        raise HelmholtzError("lambda = 1/2 is the singular point of the "
                             "plasmonic map")
    return mu0 * (2.0 * lam + 1.0) / (2.0 * lam - 1.0)


def find_resonance(surface: Surface, nodes: NodeSet, params: MediumParams,
                   target_lambda: float, tol: float = 1e-9,
                   max_iter: int = 50) -> ResonanceResult:
    """Complex secant search for the resonant mu1 at fixed omega.

    Starts at the static root of the nearest discrete NP eigenvalue; the
    iteration root-finds the analytic surrogate g(mu1) = 1 / (u^H M^{-1} v)
    for fixed random probes u, v, whose zeros are the singular points of M.
    At omega = 0 the exact static root is returned directly.
    """
    lam_d = static_eigenvalue(surface, nodes, target_lambda)
    mu_static = static_mu1(params.mu0, lam_d)
    if params.omega == 0.0:
        return ResonanceResult(target_lambda=lam_d, mu1=complex(mu_static),
                               residual=0.0, drift=0.0, iterations=0,
                               omega=0.0)
    kmax = max(abs(params.k0), abs(complex(MediumParams(
        params.mu0, params.eps0, mu_static, params.eps1, params.omega).k1)))
    if _diameter(nodes) * kmax > QUASI_STATIC_CEILING:
        raise HelmholtzError("omega exceeds the quasi-static ceiling "
                             "k * diam > 0.5")

    rng = np.random.default_rng(12345)
    probes = {}

    def probe(mu1):
        p = MediumParams(params.mu0, params.eps0, mu1, params.eps1,
                         params.omega)
        m = resonance_operator(surface, nodes, p).matrix
        if not probes:
            size = m.shape[0]
            probes["u"] = rng.normal(size=size) + 1j * rng.normal(size=size)
            probes["v"] = rng.normal(size=size) + 1j * rng.normal(size=size)
        sol = scipy.linalg.solve(m, probes["v"])
        return 1.0 / (np.conj(probes["u"]) @ sol), m

    z0 = complex(mu_static)
    z1 = z0 * (1.0 + 1e-4) + 1e-12j
    g0, _ = probe(z0)
    g1, m1 = probe(z1)
    trace = [(z0, abs(g0)), (z1, abs(g1))]
    for it in range(max_iter):
        if g1 == g0:
            break
        z2 = z1 - g1 * (z1 - z0) / (g1 - g0)
        g2, m2 = probe(z2)
        trace.append((z2, abs(g2)))
        z0, g0 = z1, g1
        z1, g1, m1 = z2, g2, m2
        residual = float(scipy.linalg.svdvals(m1)[-1])
        if residual < tol:
            drift = abs(lambda_of_media(params.mu0, z1) - lam_d)
            return ResonanceResult(target_lambda=lam_d, mu1=z1,
                                   residual=residual, drift=drift,
                                   iterations=it + 1, omega=params.omega)
    raise HelmholtzError(
        "resonance search did not converge; residual trace: "
        + ", ".join(f"mu1={z:.6g} |g|={g:.3e}" for z, g in trace))


def drift_slope(surface: Surface, nodes: NodeSet, target_lambda: float,
                omega_grid, mu0: float = 1.0, eps0: float = 1.0,
                eps1: complex = 1.0, tol: float = 1e-9):
    """Fitted slope of log |lambda(mu1(omega)) - lambda_i| vs log omega.

    Returns (slope, results); the expected quasi-static rate is 2.  Points
    whose drift is below the 1e-12 numerical floor are excluded with a
    warning.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    if len(omega_grid) < 5:
        raise HelmholtzError("need at least 5 frequencies for a slope fit")
    results = []
    for omega in omega_grid:
        params = MediumParams(mu0, eps0, -2.0, eps1, float(omega))
        results.append(find_resonance(surface, nodes, params, target_lambda,
                                      tol=tol))
    drifts = np.array([r.drift for r in results])
    keep = drifts > 1e-12
    if not np.all(keep):
        warnings.warn("drift below the 1e-12 floor at some frequencies; "
                      "excluding those points", RuntimeWarning)
    if np.sum(keep) < 2:
        raise HelmholtzError("too few usable drift points for a fit")
    slope = np.polyfit(np.log(omega_grid[keep]), np.log(drifts[keep]), 1)[0]
    return float(slope), results


def export_drift_csv(results, path: str) -> None:
    """CSV with columns (omega, mu1_re, mu1_im, lambda_drift, residual,
    iterations)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "mu1_re", "mu1_im", "lambda_drift",
                         "residual", "iterations"])
        for r in results:
            writer.writerow(["%.17g" % r.omega, "%.17g" % r.mu1.real,
                             "%.17g" % r.mu1.imag, "%.17g" % r.drift,
                             "%.17g" % r.residual, r.iterations])


# ---------------------------------------------------------------------------
# Scattering


def plane_wave(k_vector):
    """Incident-field callback for exp(i k.x): returns (values, gradients)."""
    k_vector = np.asarray(k_vector, dtype=complex)

    def field(points):
        points = np.atleast_2d(points)
        vals = np.exp(1j * (points @ k_vector))
        grads = 1j * k_vector[None, :] * vals[:, None]
        return vals, grads

    return field


@dataclass(frozen=True)
class ScatteredField:
    values: np.ndarray            # total field at the targets
    scattered: np.ndarray         # u - u0 at exterior targets (u_int at interior)
    interior_mask: np.ndarray
    transmission_error: float
    flux_error: float
    condition: float


def scattered_field(surface: Surface, nodes: NodeSet, params: MediumParams,
                    incident, targets) -> ScatteredField:
    """Solve the two-density transmission system and evaluate the field.

    Representation: u = u0 + S_{k0}[psi] outside, u = S_{k1}[phi] inside;
    continuity and flux matching on the boundary give the 2x2 block system.
    Near-resonant solves are flagged by a large block condition number but
    still returned.
    """
    ops = _four_operators(surface, nodes, params)
    s0, s1, kk0, kk1 = ops
    n = len(nodes)
    c0, c1 = params.mu0, complex(params.mu1)
    half = 0.5 * np.eye(n)
    block = np.block([
        [s1.matrix, -s0.matrix],
        [c1 * (kk1.matrix - half), -c0 * (kk0.matrix + half)],
    ])
    u0_vals, u0_grads = incident(nodes.positions)
    rhs = np.concatenate([u0_vals,
                          c0 * np.einsum("ij,ij->i", u0_grads,
                                         nodes.normals.astype(complex))])
    # Proximity to resonance is measured on the projected combined operator;
    # the raw block condition number is dominated by the structural rank
    # deficiency of the single-layer matrices and carries no signal.
    if c1 != complex(c0):
        mres = _resonance_matrix(surface, nodes, params, ops)
        msv = scipy.linalg.svdvals(mres)
        cond = float(msv[0] / msv[-1])
        if cond > 100.0:
            warnings.warn(
                f"near-resonant transmission solve (resonance condition = "
                f"{cond:.2e}); results may be amplified", RuntimeWarning)
    else:
        cond = 1.0
    # SVD-based solve: half the nodal degrees of freedom are quadrature
    # artifacts on which the single-layer matrices vanish, so the block is
    # structurally rank-deficient; the physical right-hand side lies in the
    # range.
    sol, _, rank, sv = np.linalg.lstsq(block, rhs, rcond=1e-12)
    phi, psi = sol[:n], sol[n:]
    # Discrete transmission continuity and flux residuals on the boundary.
    r1 = s1.matrix @ phi - s0.matrix @ psi - u0_vals
    r2 = block[n:, :n] @ phi + block[n:, n:] @ psi - rhs[n:]
    scale = max(float(np.max(np.abs(u0_vals))), 1e-300)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    dirs = targets / np.linalg.norm(targets, axis=1)[:, None]
    radial = np.array([surface.radial(d) for d in dirs])
    interior = np.linalg.norm(targets, axis=1) < radial
    vals = np.empty(len(targets), dtype=complex)
    scat = np.empty(len(targets), dtype=complex)
    if np.any(~interior):
        ext = targets[~interior]
        u_sc = evaluate_layer_potential(
            surface, nodes, psi, ext, KernelKind("helmholtz_single", params.k0))
        u0_ext, _ = incident(ext)
        vals[~interior] = u0_ext + u_sc
        scat[~interior] = u_sc
    if np.any(interior):
        u_in = evaluate_layer_potential(
            surface, nodes, phi, targets[interior],
            KernelKind("helmholtz_single", params.k1))
        vals[interior] = u_in
        scat[interior] = u_in
    return ScatteredField(values=vals, scattered=scat, interior_mask=interior,
                          transmission_error=float(np.max(np.abs(r1)) / scale),
                          flux_error=float(np.max(np.abs(r2)) / scale),
                          condition=cond)


def export_field_csv(targets, values, path: str) -> None:
    """CSV with columns (x, y, z, re_u, im_u)."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "re_u", "im_u"])
        for t, v in zip(targets, np.asarray(values)):
            row = ["%.17g" % c for c in t]
            while len(row) < 3:
                row.append("0")
            writer.writerow(row + ["%.17g" % np.real(v), "%.17g" % np.imag(v)])
