import numpy as np
import pytest

from npsl.localization import (BumpSpec, LocalizationError, bump_function,
                               localization_ratio, qe_variance,
                               variety_weight)
from npsl.spectrum import SpectralBand, fractional_D_power


def test_bump_is_normalized(sphere_system):
    surface, nodes, _, _ = sphere_system
    bump = bump_function(surface, nodes, BumpSpec(np.array([0.0, 0.0, 1.0]),
                                                  0.6))
    assert np.isclose(bump @ nodes.weights, 1.0)
    assert np.all(bump >= 0)


def test_bump_rejects_unresolved_support(sphere_system):
    surface, nodes, _, _ = sphere_system
    with pytest.raises(LocalizationError):
        bump_function(surface, nodes, BumpSpec(np.array([0.0, 0.0, 1.0]),
                                               1e-3))


def test_sphere_pair_ratio_is_one(sphere_system):
    surface, _, es, s = sphere_system
    frac = fractional_D_power(s, -0.5)
    band = SpectralBand(index_range=(1, 15))
    rep = localization_ratio(es, surface, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0],
                             band, -0.5, 0.7, frac)
    assert 0.9 < rep.empirical_ratio < 1.1
    assert np.isclose(rep.predicted_ratio, 1.0, atol=1e-10)


def test_variety_weight_uniform_on_sphere(sphere_system):
    surface, nodes, _, _ = sphere_system
    w = variety_weight(surface, nodes)
    area = float(np.sum(nodes.weights))
    assert np.allclose(w, 1.0 / area, rtol=1e-8)


def test_qe_variance_constant_observable(sphere_system):
    surface, nodes, es, s = sphere_system
    band = SpectralBand(index_range=(1, 15))
    out = qe_variance(es, band, np.ones(len(nodes)), surface, s)
    assert np.isclose(out["m_pred"], 1.0, atol=1e-10)
    assert np.isclose(out["band_mean"], 1.0, atol=1e-8)
    assert out["variance"] < 1e-16


def test_qe_variance_odd_observable_zero_mean(sphere_system):
    surface, nodes, es, s = sphere_system
    band = SpectralBand(index_range=(1, 15))
    out = qe_variance(es, band, nodes.positions[:, 2], surface, s)
    assert abs(out["m_pred"]) < 1e-12
