import math

import numpy as np
import pytest

from npsl.assembly import (KernelKind, assemble, evaluate_layer_potential,
                           jump_check, _sph_harm_matrix)
from npsl.geometry import build_surface, circle, node_set


def test_single_layer_sphere_harmonics(sphere_surface, sphere_nodes):
    # On the unit sphere S[Y_n] = -Y_n / (2n + 1).
    s = assemble(sphere_surface, sphere_nodes, KernelKind("laplace_single"))
    ymat = _sph_harm_matrix(sphere_nodes.directions, 3)
    col = 0
    for n in range(4):
        for _ in range(2 * n + 1):
            y = np.real(ymat[:, col]) + np.imag(ymat[:, col])
            col += 1
            if np.max(np.abs(y)) < 1e-10:
                continue
            err = np.max(np.abs(s @ y + y / (2 * n + 1)))
            assert err < 1e-10, (n, err)


def test_npstar_sphere_harmonics(sphere_surface, sphere_nodes):
    # On the unit sphere K*[Y_n] = Y_n / (2 (2n + 1)).
    k = assemble(sphere_surface, sphere_nodes, KernelKind("laplace_npstar"))
    ymat = _sph_harm_matrix(sphere_nodes.directions, 3)
    col = 0
    for n in range(4):
        for _ in range(2 * n + 1):
            y = np.real(ymat[:, col]) + np.imag(ymat[:, col])
            col += 1
            if np.max(np.abs(y)) < 1e-10:
                continue
            err = np.max(np.abs(k @ y - y / (2.0 * (2 * n + 1))))
            assert err < 1e-10, (n, err)


def test_exterior_potential_of_unit_density(sphere_surface, sphere_nodes):
    # S[1](x) = -1/|x| outside the unit sphere.
    targets = np.array([[2.0, 0.0, 0.0], [0.0, 0.0, -3.5]])
    vals = evaluate_layer_potential(sphere_surface, sphere_nodes,
                                    np.ones(len(sphere_nodes)), targets,
                                    KernelKind("laplace_single"))
    exact = -1.0 / np.linalg.norm(targets, axis=1)
    assert np.allclose(vals, exact, atol=1e-10)


def test_helmholtz_reduces_to_laplace(sphere_surface, sphere_nodes):
    s = assemble(sphere_surface, sphere_nodes,
                 KernelKind("laplace_single")).matrix
    ks = assemble(sphere_surface, sphere_nodes,
                  KernelKind("helmholtz_single", 1e-7)).matrix
    assert np.max(np.abs(ks - s)) < 1e-6
    k = assemble(sphere_surface, sphere_nodes,
                 KernelKind("laplace_npstar")).matrix
    kk = assemble(sphere_surface, sphere_nodes,
                  KernelKind("helmholtz_npstar", 1e-7)).matrix
    assert np.max(np.abs(kk - k)) < 1e-10


def test_weighted_symmetry_of_single_layer(sphere_surface, sphere_nodes):
    # The kernel is symmetric, so diag(w) S should be (nearly) symmetric.
    s = assemble(sphere_surface, sphere_nodes,
                 KernelKind("laplace_single")).matrix
    ws = sphere_nodes.weights[:, None] * s
    scale = np.max(np.abs(ws))
    assert np.max(np.abs(ws - ws.T)) / scale < 1e-10


def test_circle_single_layer_modes():
    surface = build_surface(circle(1.0))
    nodes = node_set(surface, 128)
    s = assemble(surface, nodes, KernelKind("laplace_single"))
    theta = np.arctan2(nodes.positions[:, 1], nodes.positions[:, 0])
    for n in (1, 2, 5):
        density = np.cos(n * theta)
        assert np.max(np.abs(s @ density + density / (2 * n))) < 1e-12


def test_jump_relation_smoke(sphere_surface, sphere_nodes):
    ymat = _sph_harm_matrix(sphere_nodes.directions, 1)
    density = np.real(ymat[:, 3])
    assert jump_check(sphere_surface, sphere_nodes, density, 1e-3) < 1e-2


def test_unknown_kernel_rejected(sphere_surface, sphere_nodes):
    with pytest.raises(Exception):
        assemble(sphere_surface, sphere_nodes, KernelKind("biharmonic"))
