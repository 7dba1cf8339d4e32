import logging

import numpy as np
import pytest

from models.config_models import BoundaryConditionSpec
from models.fem_models import (
    MassScheme,
    Mesh,
    NewmarkParams,
    NewmarkState,
    NewtonSettings,
    PolytopalElement,
    StabilizationConfig,
)
from services.assembly import GlobalSystem
from services.dynamics import (
    dynamic_residual_tangent,
    external_work_increment,
    initial_acceleration,
    kinetic_energy,
    linear_momentum,
    newmark_update,
    solve_static,
    step,
)
from services.mesh_generation import generate_structured
from utils.errors import NewtonDiverged

pytestmark = pytest.mark.unit

TIGHT = NewtonSettings(tol_abs=1e-12, tol_rel=1e-13, max_iter=30)


def _bc(**fields):
    return BoundaryConditionSpec.model_validate(fields)


def _cantilever(strip_system, load):
    strip_system.apply_boundary_conditions([
        _bc(kind="dirichlet_fixed", target="xmin"),
        _bc(kind="traction", target="xmax", value=load),
    ])
    return strip_system


def test_newmark_update_formulas():
    state = NewmarkState(u=np.array([1.0]), v=np.array([2.0]), a=np.array([-4.0]), t=0.0)
    params = NewmarkParams(dt=0.5)
    v, a = newmark_update(state, np.array([2.0]), params)
    # a = (2 - 1)/(0.25 * 0.25) - 2/(0.25 * 0.5) - (2 - 1)(-4)
    assert a[0] == pytest.approx(16.0 - 16.0 + 4.0)
    assert v[0] == pytest.approx(2.0 + 0.5 * (0.5 * -4.0 + 0.5 * a[0]))


def test_newmark_params_validation():
    with pytest.raises(ValueError):
        NewmarkParams(dt=0.0)
    with pytest.raises(ValueError):
        NewmarkParams(dt=1.0, zeta=0.0)
    assert NewmarkParams(dt=0.1).mass_factor == pytest.approx(400.0)


def test_dynamic_residual_tangent_dense():
    M = np.diag([2.0, 3.0])
    state = NewmarkState(np.zeros(2), np.zeros(2), np.zeros(2))
    params = NewmarkParams(dt=1.0)
    R, K = dynamic_residual_tangent(M, state, np.array([1.0, 1.0]), params)
    np.testing.assert_allclose(R, [8.0, 12.0])
    np.testing.assert_allclose(K, 4.0 * M)


def test_energy_helpers():
    M = np.diag([2.0, 2.0, 1.0, 1.0])
    v = np.array([1.0, 0.0, 3.0, -1.0])
    assert kinetic_energy(M, v) == pytest.approx(0.5 * (2.0 + 9.0 + 1.0))
    np.testing.assert_allclose(linear_momentum(M, v, 2), [5.0, -1.0])
    W = external_work_increment(np.ones(4), 3.0 * np.ones(4), np.zeros(4), np.full(4, 0.5))
    assert W == pytest.approx(0.5 * 4.0 * 4.0 * 0.5)


def test_static_solve_balances_reactions(strip_system):
    """Given a small end traction, the converged reactions cancel the applied load."""
    system = _cantilever(strip_system, [0.01, -0.002])
    u, report = solve_static(system, settings=TIGHT)
    assert report.converged
    assert report.iterations >= 2
    assert report.residual_history[-1] < report.residual_history[0]
    applied = system.external_forces(0.0).reshape(-1, 2).sum(axis=0)
    np.testing.assert_allclose(report.reactions.reshape(-1, 2).sum(axis=0), -applied, atol=1e-10)
    np.testing.assert_allclose(system.equilibrium_error(u, 0.0), 0.0, atol=1e-10)
    assert u.reshape(-1, 2)[list(system.mesh.boundary_sets["xmax"].nodes), 0].min() > 0.0


def test_static_response_is_linear_for_small_loads(strip_mesh, unit_material):
    tips = []
    for scale in (1.0, 2.0):
        system = GlobalSystem(strip_mesh, unit_material, StabilizationConfig(0.4, 0.0))
        _cantilever(system, [0.0, -1e-6 * scale])
        u, _ = solve_static(system, settings=TIGHT)
        tips.append(u.reshape(-1, 2)[:, 1].min())
    assert tips[1] == pytest.approx(2.0 * tips[0], rel=1e-4)


def test_single_iteration_cap_raises(strip_system):
    system = _cantilever(strip_system, [0.01, 0.0])
    with pytest.raises(NewtonDiverged, match="no convergence"):
        solve_static(system, settings=NewtonSettings(max_iter=1))


def _fan_system(unit_material):
    """Triangle split into three around an interior node P, corners constrained."""
    coordinates = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0 / 3.0, 1.0 / 3.0]]
    elements = [PolytopalElement((0, 1, 3)), PolytopalElement((1, 2, 3)), PolytopalElement((2, 0, 3))]
    return GlobalSystem(Mesh(2, coordinates, elements), unit_material, StabilizationConfig(0.4, 0.0))


def test_large_prescribed_translation_is_ramped(unit_material, caplog):
    """Given corners moved by (2, 0) with P left at rest, the first iterate inverts and the values are ramped."""
    system = _fan_system(unit_material)
    A = np.array([[0.05, 0.01], [-0.02, 0.03]])
    c = np.array([2.0, 0.0])
    exact = (c + system.mesh.coordinates @ A.T).ravel()
    corners = system.dof_map.dofs([0, 1, 2])
    system.add_dirichlet(corners, exact[corners])
    with caplog.at_level(logging.WARNING):
        u, report = solve_static(system, settings=TIGHT)
    assert report.converged
    assert report.step_cuts >= 3
    assert "ramping prescribed displacements" in caplog.text
    np.testing.assert_allclose(u, exact, atol=1e-10)


def test_inverted_start_raises(strip_system):
    strip_system.apply_boundary_conditions([_bc(kind="dirichlet_fixed", target="xmin")])
    u0 = np.zeros(strip_system.n_dofs)
    xmax = list(strip_system.mesh.boundary_sets["xmax"].nodes)
    u0.reshape(-1, 2)[xmax, 0] = -3.0
    with pytest.raises(NewtonDiverged, match="initial iterate inverts"):
        solve_static(strip_system, u0=u0)


def test_unloaded_free_body_conserves_momentum(square_mesh, unit_material, rng):
    """Given a free element with a drift plus random initial velocity, M v stays constant over 100 steps."""
    system = GlobalSystem(square_mesh, unit_material, StabilizationConfig(0.4, 0.0), MassScheme.EXACT)
    v0 = (np.array([0.3, -0.2]) + 0.05 * rng.normal(size=(4, 2))).ravel()
    u0 = np.zeros(system.n_dofs)
    state = NewmarkState(u0, v0, initial_acceleration(system, u0, v0))
    params = NewmarkParams(dt=0.05)
    p0 = linear_momentum(system.mass, state.v, 2)
    for _ in range(100):
        state, report = step(system, state, params, TIGHT)
        assert report.converged
    np.testing.assert_allclose(linear_momentum(system.mass, state.v, 2), p0, rtol=1e-10)
    assert state.t == pytest.approx(5.0)


def test_uniform_gravity_accelerates_free_triangle(triangle_mesh, unit_material):
    system = GlobalSystem(triangle_mesh, unit_material)
    system.apply_boundary_conditions([_bc(kind="body_force", value=[0.0, -9.81])])
    a0 = initial_acceleration(system, np.zeros(system.n_dofs), np.zeros(system.n_dofs))
    np.testing.assert_allclose(a0.reshape(-1, 2), [[0.0, -9.81]] * 3, rtol=1e-10, atol=1e-10)


def test_singular_mass_uses_minimum_norm_acceleration(square_mesh, unit_material, caplog):
    """Given the rank-deficient projection mass of a quadrilateral, gravity still gives a = f / rho."""
    system = GlobalSystem(square_mesh, unit_material, StabilizationConfig(0.4, 0.0))
    system.apply_boundary_conditions([_bc(kind="body_force", value=[2.0, -9.81])])
    with caplog.at_level(logging.WARNING):
        a0 = initial_acceleration(system, np.zeros(system.n_dofs), np.zeros(system.n_dofs))
    assert "minimum-norm" in caplog.text
    np.testing.assert_allclose(a0.reshape(-1, 2), [[2.0, -9.81]] * 4, rtol=1e-6)


def test_singular_mass_on_a_strip_balances_the_body_load(unit_material, caplog):
    """Given four quadrilaterals with projection-only mass, M a0 = F and the mean acceleration is f / rho."""
    mesh = generate_structured("q1", (4, 1), box=[[0.0, 0.0], [4.0, 1.0]])
    system = GlobalSystem(mesh, unit_material, StabilizationConfig(0.4, 0.0), mass_scheme=MassScheme.CENTROID)
    system.apply_boundary_conditions([_bc(kind="body_force", value=[2.0, -9.81])])
    with caplog.at_level(logging.WARNING):
        a0 = initial_acceleration(system, np.zeros(system.n_dofs), np.zeros(system.n_dofs))
    assert "minimum-norm" in caplog.text

    F = system.external_forces(0.0)
    np.testing.assert_allclose(system.mass @ a0, F, rtol=1e-6, atol=1e-6 * np.max(np.abs(F)))
    total_mass = unit_material.rho * 4.0
    np.testing.assert_allclose(linear_momentum(system.mass, a0, 2) / total_mass, [2.0, -9.81], rtol=1e-6)


def test_no_load_gives_zero_acceleration(strip_system):
    a0 = initial_acceleration(strip_system, np.zeros(strip_system.n_dofs), np.zeros(strip_system.n_dofs))
    np.testing.assert_array_equal(a0, 0.0)
