"""
Implicit Newmark time integration with Newton iteration on the total residual.

    a_{n+1} = (u_{n+1} - u_n)/(zeta dt^2) - v_n/(zeta dt) - (1/(2 zeta) - 1) a_n
    v_{n+1} = v_n + dt [(1 - gamma) a_n + gamma a_{n+1}]
    R(u_{n+1}) = R_int(u_{n+1}) - F_ext(t_{n+1}) + M a_{n+1}
    K_eff = K + M / (zeta dt^2)
"""
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from config import Config
from models.fem_models import NewmarkParams, NewmarkState, NewtonSettings, StepReport
from services.assembly import GlobalSystem, linear_solve, newmark_acceleration, reduce_to_free
from utils.errors import InvertedElement, NewtonDiverged, SingularSystem
from utils.logger import app_logger


def newmark_update(state: NewmarkState, u_next: np.ndarray, params: NewmarkParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Velocity and acceleration at t_{n+1} from the new displacement.

    Returns:
        (v_next, a_next)
    """
    a_next = newmark_acceleration(state, u_next, params)
    v_next = state.v + params.dt * ((1.0 - params.gamma) * state.a + params.gamma * a_next)
    return v_next, a_next


def dynamic_residual_tangent(M, state: NewmarkState, u_next: np.ndarray, params: NewmarkParams):
    """
    Inertial residual M a_{n+1}(u_next) and its tangent M / (zeta dt^2).

    Works for element (dense) and global (sparse) mass matrices.
    """
    a_next = newmark_acceleration(state, u_next, params)
    return M @ a_next, M * params.mass_factor


def _newton_iterations(system: GlobalSystem, u: np.ndarray, t: float, state: Optional[NewmarkState],
                       params: Optional[NewmarkParams], settings: NewtonSettings, evaluated, history: List[float]):
    """
    Newton iterations from an admissible iterate u with fixed constrained values.

    Returns:
        (u, R, strain energy, |R|inf, residual evaluations, step cuts)
    """
    R, K, energy = evaluated
    evaluations = 1
    cuts = 0
    r0 = None
    while True:
        R_f, K_f = reduce_to_free(system, R, K)
        r_inf = float(np.max(np.abs(R_f))) if R_f.size else 0.0
        r_two = float(np.linalg.norm(R_f))
        history.append(r_two)
        if r0 is None:
            r0 = r_two
        app_logger.debug(f"t={t:.6e} newton {evaluations}: |R|inf={r_inf:.3e} |R|={r_two:.3e}")
        if r_inf < settings.tol_abs or (r0 > 0.0 and r_two / r0 < settings.tol_rel):
            return u, R, energy, r_inf, evaluations, cuts
        if evaluations >= settings.max_iter:
            raise NewtonDiverged(f"t={t:.6e}: no convergence after {evaluations} iterations (|R|inf={r_inf:.3e})")

        du = linear_solve(K_f, -R_f)
        alpha = 1.0
        while True:
            trial = u.copy()
            trial[system.free] += alpha * du
            try:
                R, K, energy = system.residual_tangent(trial, t, state, params)
                break
            except InvertedElement as e:
                cuts += 1
                if cuts > settings.max_step_cuts:
                    raise NewtonDiverged(f"t={t:.6e}: step cuts exhausted ({e})") from e
                alpha *= 0.5
                app_logger.warning(f"t={t:.6e}: {e}; cutting Newton step to {alpha:g}")
        u = trial
        evaluations += 1


def newton_solve(system: GlobalSystem, u_start: np.ndarray, t: float,
                 state: Optional[NewmarkState] = None, params: Optional[NewmarkParams] = None,
                 settings: NewtonSettings = NewtonSettings()) -> Tuple[np.ndarray, StepReport]:
    """
    Newton iteration on R(u) = 0 over the free DOFs, Dirichlet values at t.

    Converged when |R|_inf < tol_abs or |R| / |R_0| < tol_rel. An update that
    inverts an element is halved up to max_step_cuts times. When imposing the
    new Dirichlet values on u_start inverts an element, they are ramped in
    from the values u_start carries: the ramp increment is halved until the
    iterate is admissible, Newton converges at each intermediate fraction and
    the increment doubles again after every converged fraction.

    Returns:
        (u, StepReport) where iterations counts residual evaluations

    Raises:
        NewtonDiverged: iteration cap reached or step cuts exhausted
        SingularSystem: effective tangent singular
    """
    constrained = system.constrained
    start = u_start[constrained]
    target = system.prescribed_values(t)[constrained]
    u = u_start.copy()
    fraction, increment = 0.0, 1.0
    evaluations = cuts = 0
    history: List[float] = []
    while True:
        ramp_cuts = 0
        while True:
            next_fraction = min(1.0, fraction + increment)
            trial = u.copy()
            trial[constrained] = start + next_fraction * (target - start)
            try:
                evaluated = system.residual_tangent(trial, t, state, params)
                break
            except InvertedElement as e:
                ramp_cuts += 1
                if ramp_cuts > settings.max_step_cuts:
                    if fraction == 0.0:
                        raise NewtonDiverged(f"t={t:.6e}: initial iterate inverts an element ({e})") from e
                    raise NewtonDiverged(f"t={t:.6e}: prescribed displacements invert an element beyond "
                                         f"{fraction:.3g} of their increment ({e})") from e
                increment *= 0.5
        if ramp_cuts:
            app_logger.warning(f"t={t:.6e}: ramping prescribed displacements to {next_fraction:.3g} "
                               f"of their increment")
        u, R, energy, r_inf, stage_evaluations, stage_cuts = _newton_iterations(
            system, trial, t, state, params, settings, evaluated, history)
        evaluations += stage_evaluations
        cuts += ramp_cuts + stage_cuts
        if next_fraction >= 1.0:
            reactions = np.zeros(system.n_dofs)
            reactions[constrained] = R[constrained]
            return u, StepReport(evaluations, cuts, r_inf, True, history, energy, reactions)
        fraction = next_fraction
        increment *= 2.0


def step(system: GlobalSystem, state: NewmarkState, params: NewmarkParams,
         settings: NewtonSettings = NewtonSettings()) -> Tuple[NewmarkState, StepReport]:
    """
    Advance one time step from the converged state at t_n.

    Newton starts from u_n with the Dirichlet values of t_{n+1}.
    """
    t_next = state.t + params.dt
    u_next, report = newton_solve(system, state.u, t_next, state, params, settings)
    v_next, a_next = newmark_update(state, u_next, params)
    return NewmarkState(u_next, v_next, a_next, t_next), report


def initial_acceleration(system: GlobalSystem, u0: np.ndarray, v0: np.ndarray, t0: float = 0.0,
                         tol: float = Config.NEWTON_TOL_ABS) -> np.ndarray:
    """
    Acceleration consistent with equilibrium at t0: M a0 = F_ext(t0) - R_int(u0).

    A singular mass matrix (projection-only mass has rank at most d(d+1) per
    element) falls back to the minimum-norm least-squares solution.

    Raises:
        SingularSystem: the equations admit no solution
    """
    a0 = np.zeros(system.n_dofs)
    free = system.free
    if free.size == 0:
        return a0
    _, R_int, _ = system.internal_forces(u0)
    rhs = (system.external_forces(t0) - R_int)[free]
    if np.max(np.abs(rhs)) < tol:
        return a0
    M_ff = system.mass.tocsr()[free][:, free]
    try:
        a0[free] = linear_solve(M_ff, rhs)
        return a0
    except SingularSystem as e:
        app_logger.warning(f"Mass matrix singular on the free DOFs ({e}); using minimum-norm acceleration")
    solution = lsqr(sp.csr_matrix(M_ff), rhs, atol=1e-14, btol=1e-14, iter_lim=20 * max(free.size, 10))
    a_free = solution[0]
    residual = np.linalg.norm(M_ff @ a_free - rhs) / np.linalg.norm(rhs)
    if residual > 1e-6:
        raise SingularSystem(f"initial acceleration equations are inconsistent (relative residual {residual:.3e})")
    a0[free] = a_free
    return a0


def solve_static(system: GlobalSystem, t: float = 0.0, u0: Optional[np.ndarray] = None,
                 settings: NewtonSettings = NewtonSettings()) -> Tuple[np.ndarray, StepReport]:
    """Static equilibrium R_int(u) = F_ext(t) with the Dirichlet values of t."""
    u_start = np.zeros(system.n_dofs) if u0 is None else u0
    return newton_solve(system, u_start, t, None, None, settings)


def kinetic_energy(M, v: np.ndarray) -> float:
    return 0.5 * float(v @ (M @ v))


def linear_momentum(M, v: np.ndarray, dimension: int) -> np.ndarray:
    """Per-axis sum of M v."""
    return np.asarray(M @ v).reshape(-1, dimension).sum(axis=0)


def external_work_increment(F_prev: np.ndarray, F_next: np.ndarray, u_prev: np.ndarray, u_next: np.ndarray) -> float:
    """Trapezoidal work of the external loads over one step."""
    return 0.5 * float((F_prev + F_next) @ (u_next - u_prev))
