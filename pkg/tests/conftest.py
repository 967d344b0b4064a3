import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import meshes  # noqa: E402


@pytest.fixture(scope="session")
def tetra():
    return meshes.tetrahedron()


@pytest.fixture(scope="session")
def grid9():
    return meshes.grid_mesh(9, 9)


@pytest.fixture(scope="session")
def grid33():
    return meshes.grid_mesh(33, 33)


@pytest.fixture(scope="session")
def sphere2():
    return meshes.subdivided_sphere(2)


@pytest.fixture(scope="session")
def torus16():
    return meshes.torus_grid(16, 16)


@pytest.fixture(scope="session")
def genus2():
    return meshes.genus2_mesh()


@pytest.fixture(scope="session")
def annulus():
    return meshes.annulus_mesh(9, 3)
