import numpy as np
import pytest

from models.fem_models import StabilizationConfig
from services.assembly import GlobalSystem
from services.material import NeoHookean
from services.mesh_generation import generate_cmesh, generate_structured
from tests.fixtures.geometry import (
    C_POLYGON,
    CUBE,
    CUBE_FACES,
    PENTAGON,
    SERENDIPITY_SQUARE,
    UNIT_SQUARE,
    UNIT_TRIANGLE,
    polygon_mesh,
    polyhedron_mesh,
)
from utils.constants import STEEL_E, STEEL_NU, STEEL_RHO


@pytest.fixture
def rng():
    """Seeded generator so random states are reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def steel():
    """Benchmark material in mm, N, tonne, s."""
    return NeoHookean.from_engineering(STEEL_E, STEEL_NU, STEEL_RHO)


@pytest.fixture
def unit_material():
    """E = 1, nu = 0.3, rho = 1."""
    return NeoHookean.from_engineering(1.0, 0.3, 1.0)


@pytest.fixture
def square_mesh():
    return polygon_mesh(UNIT_SQUARE)


@pytest.fixture
def triangle_mesh():
    return polygon_mesh(UNIT_TRIANGLE)


@pytest.fixture
def pentagon_mesh():
    return polygon_mesh(PENTAGON)


@pytest.fixture
def c_polygon_mesh():
    """Single non-convex element whose centroid lies outside it."""
    return polygon_mesh(C_POLYGON)


@pytest.fixture
def serendipity_mesh():
    return polygon_mesh(SERENDIPITY_SQUARE)


@pytest.fixture
def cube_mesh():
    return polyhedron_mesh(CUBE, CUBE_FACES)


@pytest.fixture
def serendipity_cube_mesh():
    """One 20-node hexahedron on the unit cube."""
    return generate_structured("h2s", (1, 1, 1), [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])


@pytest.fixture
def single_element_meshes(square_mesh, pentagon_mesh, c_polygon_mesh, serendipity_mesh, cube_mesh,
                          serendipity_cube_mesh):
    """One mesh per element shape used across the projection and mass tests."""
    return {
        "square": square_mesh,
        "pentagon": pentagon_mesh,
        "c_polygon": c_polygon_mesh,
        "q2s": serendipity_mesh,
        "h1": cube_mesh,
        "h2s": serendipity_cube_mesh,
    }


@pytest.fixture
def strip_mesh():
    """2 x 1 rectangle of two 8-node cells with box boundary sets."""
    return generate_structured("q2s", (2, 1), [[0.0, 0.0], [2.0, 1.0]])


@pytest.fixture
def cmesh():
    return generate_cmesh((3, 2), [[0.0, 0.0], [3.0, 1.0]])


@pytest.fixture
def strip_system(strip_mesh, unit_material):
    """Unconstrained global model of strip_mesh."""
    return GlobalSystem(strip_mesh, unit_material, StabilizationConfig(0.4, 0.0))


@pytest.fixture
def bar_config_data():
    """Small dynamic bar: 4 x 1 cells, fixed at xmin, released with a uniform velocity."""
    return {
        "name": "small_bar",
        "mesh": {"kind": "q1", "divisions": [4, 1], "box": [[0.0, 0.0], [4.0, 1.0]]},
        "material": {"E": 1.0, "nu": 0.3, "rho": 1.0},
        "bcs": [
            {"kind": "dirichlet_fixed", "target": "xmin"},
            {"kind": "initial_velocity", "target": "all", "value": [0.01, 0.0]},
        ],
        "newmark": {"dt": 0.1, "t_end": 1.0},
        "probes": [{"name": "tip", "point": [4.0, 0.5]}],
        "output": {"snapshot_times": [0.0, 0.5], "log_every": 5},
    }
