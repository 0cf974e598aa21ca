import numpy as np
import pytest

from platevib.mesh import SimplicialComplex3, barycentric_subdivision, build_slab
from platevib.whitney import WhitneyBasis
from platevib.material import load_preset


@pytest.fixture(scope="session")
def single_tet():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return SimplicialComplex3.from_tets(verts, np.array([[0, 1, 2, 3]]))


@pytest.fixture(scope="session")
def subdivided_tet(single_tet):
    return barycentric_subdivision(single_tet)


@pytest.fixture(scope="session")
def tet_basis(subdivided_tet):
    return WhitneyBasis(subdivided_tet)


@pytest.fixture(scope="session")
def small_slab():
    return build_slab(2, 1, 2, 0.01, 0.005, 0.01)


@pytest.fixture(scope="session")
def small_slab_sub(small_slab):
    return barycentric_subdivision(small_slab)


@pytest.fixture(scope="session")
def small_slab_basis(small_slab_sub):
    return WhitneyBasis(small_slab_sub)


@pytest.fixture(scope="session")
def spruce():
    return load_preset("engelmann-spruce")
