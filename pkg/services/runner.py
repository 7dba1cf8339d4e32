"""
Simulation driver: builds the model from a SimulationConfig, runs the time
loop and writes probe histories, field snapshots and the run summary.
"""
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from config import Config
from models.config_models import MaterialSpec, MeshSpec, ProbeSpec, RunSummary, SimulationConfig
from models.fem_models import Mesh, NewmarkParams, NewmarkState, NewtonSettings, StabilizationConfig, StepReport
from services.assembly import GlobalSystem
from services.dynamics import (
    external_work_increment,
    initial_acceleration,
    kinetic_energy,
    linear_momentum,
    solve_static,
    step,
)
from services.geometry import nearest_node
from services.material import NeoHookean
from services.mesh_generation import (
    generate_cmesh,
    generate_structured,
    generate_voronoi_2d,
    mesh_statistics,
    random_seeds,
)
from services.mesh_io import load_mesh
from utils.errors import ParseError, SolverError
from utils.logger import app_logger, run_log
from utils.output import write_probe_csv, write_summary, write_vtk


@dataclass
class RunResult:
    """Final state, histories and artifacts of a run."""
    summary: RunSummary
    state: NewmarkState
    system: GlobalSystem
    histories: Dict[str, np.ndarray] = field(default_factory=dict)
    output_dir: Optional[Path] = None
    files: List[Path] = field(default_factory=list)


def load_config(path: Union[str, Path]) -> SimulationConfig:
    """
    Read a JSON simulation config.

    Raises:
        ParseError: malformed JSON
        pydantic.ValidationError: schema violation
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return SimulationConfig.model_validate(raw)


def build_mesh(spec: MeshSpec, base_dir: Optional[Path] = None) -> Mesh:
    """Generate or load the mesh described by a MeshSpec."""
    if spec.kind == "file":
        path = Path(spec.path)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_mesh(path)
    if spec.kind == "voronoi":
        seeds = spec.seeds if spec.seeds is not None else random_seeds(spec.n_seeds, spec.box, spec.random_seed)
        return generate_voronoi_2d(seeds, spec.box)
    if spec.kind == "cmesh":
        return generate_cmesh(spec.divisions, spec.box, spec.shift)
    return generate_structured(spec.kind, spec.divisions, spec.box, spec.corners)


def build_material(spec: MaterialSpec) -> NeoHookean:
    if spec.E is not None:
        return NeoHookean.from_engineering(spec.E, spec.nu, spec.rho)
    return NeoHookean(spec.kappa, spec.mu, spec.rho)


def build_system(config: SimulationConfig, mesh: Optional[Mesh] = None,
                 base_dir: Optional[Path] = None) -> GlobalSystem:
    """Mesh, material, stabilization and boundary conditions of a config."""
    if mesh is None:
        mesh = build_mesh(config.mesh, base_dir)
    if not Config.recommended_beta(config.beta_stat):
        low, high = Config.BETA_STAT_RECOMMENDED
        app_logger.warning(f"beta_stat={config.beta_stat} outside the recommended range [{low}, {high}]")
    system = GlobalSystem(
        mesh,
        build_material(config.material),
        StabilizationConfig(config.beta_stat, config.beta_dyn),
        mass_scheme=config.mass_scheme,
        scaled_monomials=config.scaled_monomials,
        workers=config.workers,
    )
    system.apply_boundary_conditions(config.bcs, config.load_factor)
    return system


def resolve_probes(probes: List[ProbeSpec], mesh: Mesh) -> Dict[str, int]:
    """
    Node index of every probe; probes outside the mesh are skipped with a
    warning.
    """
    lo, hi = mesh.bounding_box()
    slack = 1e-9 * mesh.bbox_diagonal
    resolved: Dict[str, int] = {}
    for probe in probes:
        if probe.node is not None:
            if probe.node >= mesh.n_nodes:
                app_logger.warning(f"Probe '{probe.name}': node {probe.node} does not exist, skipped")
                continue
            resolved[probe.name] = probe.node
            continue
        point = np.asarray(probe.point, dtype=float)
        if np.any(point < lo - slack) or np.any(point > hi + slack):
            app_logger.warning(f"Probe '{probe.name}': point {probe.point} outside the mesh, skipped")
            continue
        resolved[probe.name] = nearest_node(mesh, point)
    return resolved


class _Recorder:
    """Accumulates histories and diagnostics over the time loop."""

    def __init__(self, system: GlobalSystem, probes: Dict[str, int], summary: RunSummary):
        self.system = system
        self.probes = probes
        self.summary = summary
        self.rows: Dict[str, List[np.ndarray]] = {name: [] for name in probes}
        self.work = 0.0
        self._previous = None

    def record(self, state: NewmarkState, strain_energy: float, reactions: Optional[np.ndarray]) -> None:
        system, d = self.system, self.system.dim
        M = system.mass
        F = system.external_forces(state.t)
        if self._previous is not None:
            u_prev, F_prev = self._previous
            self.work += external_work_increment(F_prev, F, u_prev, state.u)
        self._previous = (state.u.copy(), F)

        s = self.summary
        s.times.append(state.t)
        s.kinetic_energy.append(kinetic_energy(M, state.v))
        s.strain_energy.append(float(strain_energy))
        s.external_work.append(self.work)
        s.momentum.append([float(p) for p in linear_momentum(M, state.v, d)])
        if reactions is not None:
            balance = (reactions + F - M @ state.a).reshape(-1, d).sum(axis=0)
            s.equilibrium_error.append(float(np.max(np.abs(balance))))

        for name, node in self.probes.items():
            dofs = system.dof_map.dofs([node])
            self.rows[name].append(np.concatenate([[state.t], state.u[dofs], state.v[dofs], state.a[dofs]]))

    def histories(self) -> Dict[str, np.ndarray]:
        return {name: np.asarray(rows) for name, rows in self.rows.items()}


def _snapshot_due(t: float, dt: float, pending: List[float]) -> bool:
    if pending and t >= pending[0] - 0.5 * dt:
        while pending and t >= pending[0] - 0.5 * dt:
            pending.pop(0)
        return True
    return False


def run(config: SimulationConfig, output_dir: Optional[Union[str, Path]] = None,
        base_dir: Optional[Path] = None, write: bool = True, mesh: Optional[Mesh] = None) -> RunResult:
    """
    Execute a simulation.

    Dynamic runs integrate from rest-or-initial-velocity at t = 0 to t_end with
    implicit Newmark steps. Static runs solve equilibrium at the same time
    stations (quasi-static load path).

    Args:
        config: validated run description
        output_dir: artifact directory (default <output.directory>/<name>)
        base_dir: directory against which relative mesh paths resolve
        write: write CSV/VTK/JSON artifacts
        mesh: prebuilt mesh overriding config.mesh

    Raises:
        SolverError: Newton divergence or singular system, with step context
    """
    out: Optional[Path] = None
    if write:
        out = Path(output_dir) if output_dir is not None else Path(config.output.directory) / config.name
        out.mkdir(parents=True, exist_ok=True)
    if out is None or not config.output.log_file:
        return _execute(config, out, base_dir, mesh)
    with run_log(out / "run.log") as log_path:
        result = _execute(config, out, base_dir, mesh)
    result.files.append(log_path)
    return result


def _execute(config: SimulationConfig, out: Optional[Path], base_dir: Optional[Path],
             mesh: Optional[Mesh]) -> RunResult:
    started = time.perf_counter()
    timings: Dict[str, float] = {}
    system = build_system(config, mesh, base_dir)
    mesh = system.mesh
    stats = mesh_statistics(mesh)
    app_logger.info(f"Run '{config.name}' ({config.analysis}): {stats['nodes']} nodes, "
                    f"{stats['elements']} elements, {system.n_dofs} DOFs, {system.constrained.size} constrained")
    app_logger.info(f"Nodes per element: {stats['nodes_per_element']}")

    params = NewmarkParams(config.newmark.dt, config.newmark.gamma, config.newmark.zeta)
    settings = NewtonSettings(config.newton.tol_abs, config.newton.tol_rel,
                              config.newton.max_iter, config.newton.max_step_cuts)
    probes = resolve_probes(config.probes, mesh)
    summary = RunSummary(name=config.name, analysis=config.analysis, dimension=mesh.dimension,
                         n_nodes=mesh.n_nodes, n_elements=mesh.n_elements, n_dofs=system.n_dofs,
                         mesh=dict(stats), probes=probes)
    recorder = _Recorder(system, probes, summary)
    timings["setup"] = time.perf_counter() - started

    tick = time.perf_counter()
    _ = system.mass
    timings["mass"] = time.perf_counter() - tick

    files: List[Path] = []
    pending = sorted(config.output.snapshot_times)

    def snapshot(state: NewmarkState) -> None:
        if out is None:
            return
        path = write_vtk(out / f"snapshot_{len(summary.snapshots):04d}.vtk", mesh, state.u, state.v, state.a,
                         title=f"{config.name} t={state.t:.6e}")
        summary.snapshots.append(path.name)
        files.append(path)

    tick = time.perf_counter()
    dynamic = config.analysis == "dynamic"
    u0 = np.zeros(system.n_dofs)
    if np.any(system.prescribed_values(0.0)[system.constrained] != 0.0):
        # nonzero Dirichlet values at t = 0: start from the equilibrium they impose
        try:
            u0, report = solve_static(system, 0.0, u0, settings)
        except SolverError as e:
            app_logger.error(f"Initial equilibrium failed: {e}")
            raise type(e)(f"step 0 (t=0): {e}") from e
        app_logger.info(f"Initial equilibrium: newton={report.iterations} cuts={report.step_cuts}")
    v0 =system.initial_velocity.copy() if dynamic else np.zeros(system.n_dofs)
    v0[system.constrained] = 0.0
    a0 = initial_acceleration(system, u0, v0, 0.0, settings.tol_abs) if dynamic else np.zeros(system.n_dofs)
    state = NewmarkState(u0, v0, a0, 0.0)
    energy0, _, _ = system.internal_forces(u0)
    recorder.record(state, energy0, None)
    if _snapshot_due(0.0, params.dt, pending):
        snapshot(state)
    timings["initial"] = time.perf_counter() - tick

    n_steps = max(1, int(math.ceil(config.newmark.t_end / params.dt - 1e-9)))
    tick = time.perf_counter()
    for k in range(1, n_steps + 1):
        try:
            if dynamic:
                state, report = step(system, state, params, settings)
            else:
                t_next = k * params.dt
                u, report = solve_static(system, t_next, state.u, settings)
                state = NewmarkState(u, np.zeros_like(u), np.zeros_like(u), t_next)
        except SolverError as e:
            app_logger.error(f"Step {k}/{n_steps} failed: {e}")
            raise type(e)(f"step {k} (t={state.t + params.dt:.6e}): {e}") from e
        _record_step(recorder, summary, state, report)
        if k % config.output.log_every == 0 or k == n_steps:
            app_logger.info(f"step {k}/{n_steps} t={state.t:.6e} newton={report.iterations} "
                            f"cuts={report.step_cuts} |R|inf={report.residual_norm:.3e}")
        if _snapshot_due(state.t, params.dt, pending):
            snapshot(state)
    timings["time_loop"] = time.perf_counter() - tick
    summary.steps = n_steps

    histories = recorder.histories()
    if out is not None:
        tick = time.perf_counter()
        for name, table in histories.items():
            d = mesh.dimension
            files.append(write_probe_csv(out / f"probe_{name}.csv", table[:, 0], table[:, 1:1 + d],
                                         table[:, 1 + d:1 + 2 * d], table[:, 1 + 2 * d:]))
        timings["output"] = time.perf_counter() - tick
    timings["total"] = time.perf_counter() - started
    summary.timings = timings
    if out is not None and config.output.summary:
        files.append(write_summary(out / "summary.json", summary))
    if out is not None:
        app_logger.info(f"Wrote {len(files)} files to {out}")
    app_logger.info(f"Run '{config.name}' finished: {n_steps} steps, "
                    f"{sum(summary.newton_iterations)} Newton iterations in {timings['total']:.2f} s")
    return RunResult(summary, state, system, histories, out, files)


def _record_step(recorder: _Recorder, summary: RunSummary, state: NewmarkState, report: StepReport) -> None:
    summary.newton_iterations.append(report.iterations)
    summary.step_cuts.append(report.step_cuts)
    recorder.record(state, report.strain_energy, report.reactions)
