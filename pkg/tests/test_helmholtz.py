import math

import numpy as np
import pytest

from npsl.geometry import build_surface, node_set, sphere
from npsl.helmholtz import (HelmholtzError, MediumParams, find_resonance,
                            lambda_of_media, plane_wave, scattered_field,
                            static_mu1)


@pytest.fixture(scope="module")
def helm_sphere():
    surface = build_surface(sphere(1.0))
    return surface, node_set(surface, 10)


def test_static_map_roundtrip():
    for lam in (1.0 / 6.0, 1.0 / 10.0, -0.2):
        mu1 = static_mu1(1.0, lam)
        assert math.isclose(lambda_of_media(1.0, mu1).real, lam,
                            rel_tol=1e-14)
    with pytest.raises(HelmholtzError):
        static_mu1(1.0, 0.5)


def test_medium_params_validation():
    with pytest.raises(HelmholtzError):
        MediumParams(-1.0, 1.0, 2.0, 1.0, 0.1)
    with pytest.raises(HelmholtzError):
        MediumParams(1.0, 1.0, 0.0, 1.0, 0.1)
    with pytest.raises(HelmholtzError):
        MediumParams(1.0, 1.0, 2.0, 1.0, -0.1)


def test_static_resonance_root(helm_sphere):
    surface, nodes = helm_sphere
    res = find_resonance(surface, nodes,
                         MediumParams(1.0, 1.0, -2.0, 1.0, 0.0),
                         target_lambda=1.0 / 6.0)
    assert abs(res.mu1 + 2.0) < 1e-9


def test_finite_frequency_resonance(helm_sphere):
    surface, nodes = helm_sphere
    res = find_resonance(surface, nodes,
                         MediumParams(1.0, 1.0, -2.0, 1.0, 1e-2),
                         target_lambda=1.0 / 6.0, tol=1e-9)
    assert res.residual < 1e-9
    assert abs(res.mu1 + 2.0) < 1e-2
    assert 0 < res.drift < 1e-3


def test_quasi_static_ceiling(helm_sphere):
    surface, nodes = helm_sphere
    with pytest.raises(HelmholtzError):
        find_resonance(surface, nodes,
                       MediumParams(1.0, 1.0, -2.0, 1.0, 10.0),
                       target_lambda=1.0 / 6.0)


def test_plane_wave_gradient():
    kvec = np.array([0.0, 0.3, 0.4])
    field = plane_wave(kvec)
    pts = np.array([[1.0, 2.0, -0.5]])
    vals, grads = field(pts)
    assert np.allclose(vals, np.exp(1j * pts @ kvec))
    assert np.allclose(grads, 1j * kvec * vals[:, None])


def test_zero_contrast_scatters_nothing(helm_sphere):
    surface, nodes = helm_sphere
    params = MediumParams(1.0, 1.0, 1.0, 1.0, 1e-2)
    kvec = params.k0 * np.array([0.0, 0.0, 1.0])
    targets = np.array([[2.5, 0.0, 0.0], [0.0, 0.0, 3.0]])
    field = scattered_field(surface, nodes, params, plane_wave(kvec), targets)
    assert np.max(np.abs(field.scattered)) < 1e-10
    assert field.transmission_error < 1e-10
    assert field.flux_error < 1e-10


def test_interior_points_flagged(helm_sphere):
    surface, nodes = helm_sphere
    params = MediumParams(1.0, 1.0, 2.0, 1.0, 1e-2)
    kvec = params.k0 * np.array([0.0, 0.0, 1.0])
    targets = np.array([[0.3, 0.0, 0.0], [0.0, 0.0, 2.0]])
    field = scattered_field(surface, nodes, params, plane_wave(kvec), targets)
    assert list(field.interior_mask) == [True, False]
