import numpy as np
import pytest
import scipy.sparse as sp

from models.config_models import BoundaryConditionSpec
from models.fem_models import MassScheme, NewmarkParams, StabilizationConfig
from services.assembly import (
    DofMap,
    GlobalSystem,
    assemble,
    linear_solve,
    null_space_count,
    reduce_to_free,
)
from services.material import NeoHookean
from services.mesh_generation import generate_structured
from tests.helpers import assert_relative_close, assert_symmetric, central_jacobian, translation
from utils.errors import BoundaryConditionError, FacetNotOnBoundary, InvertedElement, SingularSystem

pytestmark = pytest.mark.unit


def _bc(**fields):
    return BoundaryConditionSpec.model_validate(fields)


def test_dof_map():
    dof_map = DofMap(5, 3)
    assert dof_map.n_dofs == 15
    assert dof_map.index(2, 1) == 7
    assert dof_map.node_axis(7) == (2, 1)
    np.testing.assert_array_equal(dof_map.dofs([0, 4]), [0, 1, 2, 12, 13, 14])
    np.testing.assert_array_equal(dof_map.dofs([1, 2], [False, True, True]), [4, 5, 7, 8])


def test_reference_state_has_no_internal_forces(strip_system):
    energy, R, K = strip_system.internal_forces(np.zeros(strip_system.n_dofs))
    assert energy == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(R, 0.0, atol=1e-15)
    assert sp.issparse(K)
    assert_symmetric(K, 1e-12)
    for axis in range(2):
        t = translation(strip_system.mesh.n_nodes, 2, axis)
        np.testing.assert_allclose(K @ t, 0.0, atol=1e-12)


def test_global_tangent_matches_residual_derivative(strip_system, rng):
    u = 0.02 * rng.uniform(-1.0, 1.0, size=strip_system.n_dofs)
    _, _, K = strip_system.internal_forces(u)

    def residual(x):
        return strip_system.internal_forces(x)[1]

    assert_relative_close(K.toarray(), central_jacobian(residual, u), 1e-6, "global tangent")


@pytest.mark.parametrize("scheme", list(MassScheme))
def test_global_mass_carries_total_mass(strip_mesh, scheme):
    material = NeoHookean.from_engineering(1.0, 0.3, rho=3.0)
    system = GlobalSystem(strip_mesh, material, StabilizationConfig(0.4, 0.2), scheme)
    M = system.mass
    assert_symmetric(M, 1e-14)
    t = translation(strip_mesh.n_nodes, 2, 0)
    assert t @ (M @ t) == pytest.approx(3.0 * 2.0, rel=1e-12)


def test_results_do_not_depend_on_worker_count(strip_mesh, unit_material, rng):
    """Given a fixed chunk size, one worker and four workers give bit-identical results."""
    serial = GlobalSystem(strip_mesh, unit_material, StabilizationConfig(0.4, 0.3), workers=1, chunk_size=1)
    pooled = GlobalSystem(strip_mesh, unit_material, StabilizationConfig(0.4, 0.3), workers=4, chunk_size=1)
    u = 0.01 * rng.normal(size=serial.n_dofs)
    e1, R1, K1 = serial.internal_forces(u)
    e4, R4, K4 = pooled.internal_forces(u)
    assert e1 == e4
    np.testing.assert_array_equal(R1, R4)
    np.testing.assert_array_equal(K1.toarray(), K4.toarray())
    np.testing.assert_array_equal(serial.mass.toarray(), pooled.mass.toarray())


def test_inverted_element_is_reported(strip_system):
    u = np.zeros(strip_system.n_dofs)
    u[0::2] = -2.0 * strip_system.mesh.coordinates[:, 0]
    with pytest.raises(InvertedElement):
        strip_system.internal_forces(u)


def test_edge_traction_totals_length_times_value(strip_system):
    strip_system.apply_boundary_conditions([_bc(kind="traction", target="xmax", value=[3.0, -1.0])])
    F = strip_system.external_forces(0.0).reshape(-1, 2)
    np.testing.assert_allclose(F.sum(axis=0), [3.0, -1.0], rtol=1e-14)
    xmax = list(strip_system.mesh.boundary_sets["xmax"].nodes)
    np.testing.assert_allclose(np.delete(F, xmax, axis=0), 0.0)


def test_face_and_line_tractions_3d(unit_material):
    mesh = generate_structured("h2s", (2, 1, 1), [[0, 0, 0], [2, 1, 1]])
    system = GlobalSystem(mesh, unit_material)
    face = system.traction_vector(mesh.boundary_sets["zmax"].facets, [0.0, 0.0, -2.0])
    assert face.reshape(-1, 3).sum(axis=0) == pytest.approx([0.0, 0.0, -4.0])
    line = system.traction_vector(mesh.boundary_sets["xmax_zmax"].facets, [0.0, 5.0, 0.0])
    assert line.reshape(-1, 3).sum(axis=0) == pytest.approx([0.0, 5.0, 0.0])


def test_body_force_totals_measure_times_value(strip_system):
    strip_system.apply_boundary_conditions([_bc(kind="body_force", value=[0.0, -9.81])])
    F = strip_system.external_forces(0.0).reshape(-1, 2)
    np.testing.assert_allclose(F.sum(axis=0), [0.0, -2.0 * 9.81], rtol=1e-13)


def test_load_factor_scales_loads(strip_system):
    strip_system.apply_boundary_conditions([_bc(kind="traction", target="ymax", value=[0.0, 10.0])],
                                           load_factor=0.1)
    assert strip_system.external_forces(0.0).sum() == pytest.approx(2.0)


def test_half_sine_load_history(strip_system):
    strip_system.apply_boundary_conditions([
        _bc(kind="traction", target="xmax", value=[0.0, 1.0],
            time_function={"kind": "half_sine", "p_max": 2.0, "period": 1.0}),
    ])
    assert strip_system.external_forces(0.5).sum() == pytest.approx(2.0)
    assert strip_system.external_forces(0.25).sum() == pytest.approx(2.0 * np.sin(np.pi / 4.0))
    np.testing.assert_array_equal(strip_system.external_forces(1.5), 0.0)


def test_dirichlet_records(strip_system):
    strip_system.apply_boundary_conditions([
        _bc(kind="dirichlet_fixed", target="xmin"),
        _bc(kind="dirichlet_prescribed", target="xmax", components=[True, False], value=[0.1, 0.0]),
    ])
    mesh = strip_system.mesh
    xmin = list(mesh.boundary_sets["xmin"].nodes)
    xmax = list(mesh.boundary_sets["xmax"].nodes)
    assert strip_system.constrained.size == 2 * len(xmin) + len(xmax)
    assert np.intersect1d(strip_system.constrained, strip_system.free).size == 0
    u = strip_system.apply_dirichlet(np.ones(strip_system.n_dofs), 0.0)
    np.testing.assert_allclose(u.reshape(-1, 2)[xmin], 0.0)
    np.testing.assert_allclose(u.reshape(-1, 2)[xmax, 0], 0.1)
    np.testing.assert_allclose(u.reshape(-1, 2)[xmax, 1], 1.0)


def test_affine_dirichlet_values(strip_system):
    strip_system.apply_boundary_conditions([
        _bc(kind="dirichlet_prescribed", target="boundary", affine={"c": [0.1, 0.0], "A": [[0.01, 0.0], [0.02, -0.01]]}),
    ])
    nodes = list(strip_system.mesh.boundary_sets["boundary"].nodes)
    X = strip_system.mesh.coordinates[nodes]
    values = strip_system.prescribed_values(0.0).reshape(-1, 2)[nodes]
    np.testing.assert_allclose(values, [0.1, 0.0] + X @ np.array([[0.01, 0.0], [0.02, -0.01]]).T)


def test_initial_velocity(strip_system):
    strip_system.apply_boundary_conditions([
        _bc(kind="initial_velocity", target="all", components=[True, False], value=[2.0, 5.0]),
    ])
    v0 = strip_system.initial_velocity.reshape(-1, 2)
    np.testing.assert_array_equal(v0[:, 0], 2.0)
    np.testing.assert_array_equal(v0[:, 1], 0.0)


def test_unknown_boundary_set(strip_system):
    with pytest.raises(BoundaryConditionError, match="available"):
        strip_system.apply_boundary_conditions([_bc(kind="dirichlet_fixed", target="left_edge")])


def test_dirichlet_and_traction_on_same_dofs(strip_system):
    with pytest.raises(BoundaryConditionError, match="same DOF"):
        strip_system.apply_boundary_conditions([
            _bc(kind="dirichlet_fixed", target="xmin"),
            _bc(kind="traction", target="xmin", value=[1.0, 0.0]),
        ])


def test_traction_on_other_component_is_allowed(strip_system):
    strip_system.apply_boundary_conditions([
        _bc(kind="dirichlet_fixed", target="xmin", components=[True, False]),
        _bc(kind="traction", target="xmin", components=[False, True], value=[0.0, 1.0]),
    ])
    assert strip_system.external_forces(0.0).sum() == pytest.approx(1.0)


def test_body_force_must_target_all(strip_system):
    with pytest.raises(BoundaryConditionError):
        strip_system.apply_boundary_conditions([_bc(kind="body_force", target="ymin", value=[0.0, -1.0])])


def test_interior_facet_is_rejected(strip_system):
    interior = [pairs[0][1] for pairs in strip_system.mesh.facet_owners().values() if len(pairs) == 2]
    assert interior
    with pytest.raises(FacetNotOnBoundary):
        strip_system.facet_weights(interior[:1])


def test_reduce_to_free(strip_system):
    strip_system.apply_boundary_conditions([_bc(kind="dirichlet_fixed", target="xmin")])
    R, K, _ = strip_system.residual_tangent(np.zeros(strip_system.n_dofs), 0.0)
    R_f, K_f = reduce_to_free(strip_system, R, K)
    n_free = strip_system.free.size
    assert R_f.shape == (n_free,) and K_f.shape == (n_free, n_free)
    assert null_space_count(K_f) == 0


def test_unconstrained_tangent_has_rigid_null_space(strip_system):
    _, K = assemble(strip_system, None, np.zeros(strip_system.n_dofs), 0.0)
    assert null_space_count(K) == 3


def test_linear_solve(rng):
    A = rng.normal(size=(6, 6))
    K = sp.csr_matrix(A @ A.T + 6.0 * np.eye(6))
    rhs = rng.normal(size=6)
    np.testing.assert_allclose(K @ linear_solve(K, rhs), rhs, atol=1e-12)
    assert linear_solve(sp.csr_matrix((0, 0)), np.zeros(0)).shape == (0,)


def test_singular_system_reports_null_space():
    with pytest.raises(SingularSystem) as info:
        linear_solve(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]))
    assert info.value.null_count == 1


def test_linear_solve_ignores_dof_scaling():
    """Given a well-conditioned system in badly mixed units, the diagonal-scaled pivots accept it."""
    D = sp.diags([1.0, 1e-7])
    K = sp.csr_matrix(D @ sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]) @ D)
    x = linear_solve(K, np.array([5.0, 7e-7]))
    np.testing.assert_allclose(x, [1.0, 3e7], rtol=1e-10)


def test_free_element_effective_tangent(square_mesh, unit_material):
    """
    K + M / (zeta dt^2) of one free quadrilateral: the exact projection mass
    gives the rigid rotation inertia, the centroid mass does not.
    """
    mass_factor = NewmarkParams(dt=0.05).mass_factor
    rhs = np.linspace(-1.0, 1.0, 8)

    exact = GlobalSystem(square_mesh, unit_material, StabilizationConfig(0.4, 0.0), MassScheme.EXACT)
    _, _, K = exact.internal_forces(np.zeros(8))
    K_eff = K + mass_factor * exact.mass
    np.testing.assert_allclose(K_eff @ linear_solve(K_eff, rhs), rhs, atol=1e-10)

    centroid = GlobalSystem(square_mesh, unit_material, StabilizationConfig(0.4, 0.0), MassScheme.CENTROID)
    _, _, K = centroid.internal_forces(np.zeros(8))
    with pytest.raises(SingularSystem) as info:
        linear_solve(K + mass_factor * centroid.mass, rhs)
    assert info.value.null_count == 1


def test_floating_structure_is_singular(strip_system):
    _, K = assemble(strip_system, None, np.zeros(strip_system.n_dofs), 0.0)
    with pytest.raises(SingularSystem):
        linear_solve(K, np.ones(strip_system.n_dofs))
