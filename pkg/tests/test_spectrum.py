import numpy as np
import pytest

from npsl.assembly import KernelKind, assemble
from npsl.geometry import node_set
from npsl.spectrum import (SpectralBand, SpectralError, converged_count,
                           fractional_D_power, multiplicity_groups,
                           symmetrized_eigensystem)


def test_sphere_eigenvalues_low_degrees(sphere_system):
    _, _, es, _ = sphere_system
    expected = np.concatenate([
        np.full(2 * n + 1, 1.0 / (2.0 * (2 * n + 1))) for n in range(4)])
    assert np.max(np.abs(es.eigenvalues[:len(expected)] - expected)) < 1e-10


def test_sphere_multiplicities(sphere_system):
    _, _, es, _ = sphere_system
    groups = multiplicity_groups(es.eigenvalues[:16], atol=1e-6)
    sizes = np.bincount(groups)
    assert list(sizes) == [1, 3, 5, 7]


def test_c_weights_positive(sphere_system):
    _, _, es, _ = sphere_system
    assert np.all(es.weights > 0)


def test_eigenfunctions_l2_normalized(sphere_system):
    _, nodes, es, _ = sphere_system
    norms = np.einsum("x,xj->j", nodes.weights, es.eigenfunctions ** 2)
    assert np.allclose(norms, 1.0, atol=1e-10)


def test_fractional_power_unit_exponent(sphere_system):
    # |D|^alpha is realized as (-2S)^(-alpha), so exponent -1 gives -2S back.
    _, _, es, s = sphere_system
    frac = fractional_D_power(s, -1.0)
    phi = es.eigenfunctions[:, :10]
    assert np.max(np.abs(frac @ phi - (-2.0) * (s @ phi))) < 1e-8


def test_fractional_power_composition(sphere_system):
    _, _, es, s = sphere_system
    plus = fractional_D_power(s, 0.5)
    minus = fractional_D_power(s, -0.5)
    phi = es.eigenfunctions[:, :10]
    assert np.max(np.abs(minus @ (plus @ phi) - phi)) < 1e-8


def test_band_selection(sphere_system):
    _, _, es, _ = sphere_system
    idx = SpectralBand(index_range=(1, 3)).indices(es)
    assert list(idx) == [1, 2, 3]
    lam_sq = es.eigenvalues ** 2
    lo, hi = lam_sq[8], lam_sq[4]
    idx2 = SpectralBand(lambda_sq_range=(lo, hi)).indices(es)
    assert np.all(lam_sq[idx2] >= lo) and np.all(lam_sq[idx2] <= hi)


def test_converged_count_under_refinement(sphere_surface, sphere_system):
    _, _, es_fine, _ = sphere_system
    nodes = node_set(sphere_surface, 8)
    kstar = assemble(sphere_surface, nodes, KernelKind("laplace_npstar"))
    s = assemble(sphere_surface, nodes, KernelKind("laplace_single"))
    es_coarse = symmetrized_eigensystem(kstar, s)
    assert converged_count(es_coarse, es_fine) >= 9


def test_weyl_requires_enough_eigenvalues(sphere_surface):
    from npsl.spectrum import weyl_diagnostic
    nodes = node_set(sphere_surface, 8)
    kstar = assemble(sphere_surface, nodes, KernelKind("laplace_npstar"))
    s = assemble(sphere_surface, nodes, KernelKind("laplace_single"))
    es = symmetrized_eigensystem(kstar, s)
    with pytest.raises(SpectralError):
        weyl_diagnostic(es, sphere_surface, (20, 10 * len(es)))
