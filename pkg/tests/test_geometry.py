import math

import numpy as np
import pytest

from npsl.geometry import (GeometryError, assumption_a_margin, build_surface,
                           circle, ellipse2d, ellipsoid, node_set, sphere,
                           surface_point)


def test_sphere_jet_curvatures(sphere_surface):
    jet = sphere_surface.jet(surface_point(sphere_surface, "equator"))
    assert np.allclose(jet.principal_curvatures, [1.0, 1.0], atol=1e-12)
    assert math.isclose(jet.mean_curvature, 1.0, rel_tol=1e-12)
    assert math.isclose(np.linalg.norm(jet.normal), 1.0, rel_tol=1e-12)


def test_ellipsoid_axis_curvatures():
    # At the end of the x-axis of x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 the
    # principal curvatures are a/b^2 and a/c^2.
    a, b, c = 1.0, 1.0, math.sqrt(2.0)
    surface = build_surface(ellipsoid(a, b, c))
    jet = surface.jet(surface.chart_point(np.array([1.0, 0.0, 0.0])))
    assert np.allclose(np.sort(jet.principal_curvatures),
                       sorted([a / b ** 2, a / c ** 2]), atol=1e-8)


def test_sphere_quadrature_area(sphere_surface):
    nodes = node_set(sphere_surface, 12)
    assert math.isclose(float(np.sum(nodes.weights)), 4.0 * math.pi,
                        rel_tol=1e-12)


def test_node_normals_point_outward(sphere_surface):
    nodes = node_set(sphere_surface, 8)
    assert np.all(np.einsum("ij,ij->i", nodes.positions, nodes.normals) > 0)


def test_ellipse_perimeter():
    import scipy.special
    a, b = 2.0, 1.0
    surface = build_surface(ellipse2d(a, b))
    nodes = node_set(surface, 256)
    # Perimeter = 4 a E(e^2) with eccentricity e^2 = 1 - (b/a)^2.
    exact = 4.0 * a * scipy.special.ellipe(1.0 - (b / a) ** 2)
    assert math.isclose(float(np.sum(nodes.weights)), exact, rel_tol=1e-12)


def test_named_points():
    surface = build_surface(ellipsoid(1.0, 1.0, 3.0))
    pole = surface.position(surface_point(surface, "pole"))
    equator = surface.position(surface_point(surface, "equator"))
    assert np.allclose(np.abs(pole), [0.0, 0.0, 3.0], atol=1e-12)
    assert math.isclose(abs(equator[2]), 0.0, abs_tol=1e-12)
    assert math.isclose(np.hypot(equator[0], equator[1]), 1.0, rel_tol=1e-12)


def test_assumption_margin_sign():
    convex = build_surface(sphere(1.0))
    assert assumption_a_margin(convex) > 0


def test_invalid_surfaces():
    with pytest.raises(GeometryError):
        sphere(-1.0)
    with pytest.raises(GeometryError):
        ellipsoid(1.0, 0.0, 1.0)
    with pytest.raises(GeometryError):
        circle(0.0)
