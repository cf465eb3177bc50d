import numpy as np
import pytest

from npsl.assembly import KernelKind, assemble
from npsl.geometry import build_surface, ellipsoid, node_set, sphere
from npsl.spectrum import symmetrized_eigensystem


@pytest.fixture(scope="session")
def sphere_surface():
    return build_surface(sphere(1.0))


@pytest.fixture(scope="session")
def sphere_nodes(sphere_surface):
    return node_set(sphere_surface, 12)


@pytest.fixture(scope="session")
def sphere_system(sphere_surface, sphere_nodes):
    kstar = assemble(sphere_surface, sphere_nodes,
                     KernelKind("laplace_npstar"))
    s = assemble(sphere_surface, sphere_nodes, KernelKind("laplace_single"))
    es = symmetrized_eigensystem(kstar, s)
    return sphere_surface, sphere_nodes, es, s


@pytest.fixture(scope="session")
def ellipsoid_surface():
    return build_surface(ellipsoid(1.0, 1.0, 2.0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(42)
