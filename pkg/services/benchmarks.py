"""
Benchmark problems, analytical oracles and history post-processing.

Presets reproduce the geometry, loads and material of the standard elastodynamic
benchmarks (wave propagation in a bar, transversally loaded beams, Cook's
membrane, a vibrating plate) as SimulationConfig documents.
"""
import math
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from models.config_models import SimulationConfig
from models.fem_models import BenchmarkPreset
from utils.constants import (
    BAR2D_DIVISIONS,
    BAR2D_HEIGHT,
    BAR2D_LENGTH,
    BAR3D_DIVISIONS,
    BAR3D_HEIGHT,
    BAR3D_LENGTH,
    BAR3D_WIDTH,
    BAR_OMEGA_FACTOR,
    BAR_STEPS_PER_TRANSIT,
    BAR_V0,
    BEAM2D_DIVISIONS,
    BEAM2D_HEIGHT,
    BEAM2D_LENGTH,
    BEAM2D_PMAX,
    BEAM3D_DIVISIONS,
    BEAM3D_HEIGHT,
    BEAM3D_LENGTH,
    BEAM3D_PMAX,
    BEAM3D_WIDTH,
    CANTILEVER_ROOT_SQ,
    CLAMPED_ROOT_SQ,
    COOK_CORNERS,
    COOK_HEIGHT,
    COOK_LENGTH,
    COOK_LEVEL,
    COOK_PMAX,
    PLATE3D_DIVISIONS,
    PLATE3D_HEIGHT,
    PLATE3D_LENGTH,
    PLATE3D_V0,
    PLATE3D_WIDTH,
    SERIES_MAX_TERMS,
    SERIES_TOL,
    STEEL_E,
    STEEL_NU,
    STEEL_RHO,
    STEPS_PER_PERIOD,
)
from utils.logger import app_logger

_TERM_CHUNK = 4096


def wave_speed(E: float, rho: float) -> float:
    """Bar wave speed c = sqrt(E / rho)."""
    return math.sqrt(E / rho)


def bar_omega(n, c: float, length: float, omega_factor: float = BAR_OMEGA_FACTOR):
    """omega_n = factor (2n + 1) pi c / (2 l)"""
    return omega_factor * (2 * np.asarray(n) + 1) * np.pi * c / (2.0 * length)


def _series_terms_needed(v0: float, c: float, length: float, omega_factor: float) -> int:
    # term bound 2 v0 c / (l omega_n^2) decreases like n^-2
    tol = SERIES_TOL * length
    w0 = omega_factor * np.pi * c / (2.0 * length)
    amplitude = 2.0 * abs(v0) * c / (length * w0 * w0)
    if amplitude < tol:
        return 1
    n = int(math.ceil(0.5 * (math.sqrt(amplitude / tol) - 1.0))) + 1
    return min(max(n, 1), SERIES_MAX_TERMS)


def analytical_bar_displacement(x, t, v0: float, c: float, length: float, n_terms: Optional[int] = None,
                                omega_factor: float = BAR_OMEGA_FACTOR) -> np.ndarray:
    """
    Displacement of a bar fixed at x = 0 and free at x = l, released with a
    uniform initial velocity v0:

        u(x, t) = sum_n 2 v0 c / (l omega_n^2) sin(omega_n x / c) sin(omega_n t)

    x and t broadcast against each other. Without n_terms the series is cut
    once the term bound falls below 1e-12 l.
    """
    if n_terms is not None and n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    total = n_terms if n_terms is not None else _series_terms_needed(v0, c, length, omega_factor)
    u = np.zeros(x.shape)
    for start in range(0, total, _TERM_CHUNK):
        n = np.arange(start, min(start + _TERM_CHUNK, total))
        w = bar_omega(n, c, length, omega_factor)
        coeff = 2.0 * v0 * c / (length * w * w)
        u += np.tensordot(np.sin(np.multiply.outer(x, w) / c) * np.sin(np.multiply.outer(t, w)),
                          coeff, axes=([-1], [0]))
    return u


def beam_force_period(E: float, rho: float, length: float, b: float, h: float) -> float:
    """Load period T = 3.5156 / (2 pi l^2) sqrt(12 rho / (E b h^3))."""
    return CANTILEVER_ROOT_SQ / (2.0 * math.pi * length ** 2) * math.sqrt(12.0 * rho / (E * b * h ** 3))


def cantilever_period(E: float, rho: float, length: float, h: float) -> float:
    """First bending period of a cantilever, T = 2 pi l^2 / 1.8751^2 sqrt(12 rho / (E h^2))."""
    return 2.0 * math.pi * length ** 2 / CANTILEVER_ROOT_SQ * math.sqrt(12.0 * rho / (E * h ** 2))


def clamped_period(E: float, rho: float, length: float, h: float) -> float:
    """First bending period of a beam clamped at both ends."""
    return 2.0 * math.pi * length ** 2 / CLAMPED_ROOT_SQ * math.sqrt(12.0 * rho / (E * h ** 2))


def bar_time_step(length: float, c: float) -> float:
    """dt = l / (200 c)"""
    return length / (BAR_STEPS_PER_TRANSIT * c)


def force_time_step(period: float) -> float:
    """dt = T / 100"""
    return period / STEPS_PER_PERIOD


# ----------------------------------------------------------------------
# presets

def _material() -> dict:
    return {"E": STEEL_E, "nu": STEEL_NU, "rho": STEEL_RHO}


def _box_mesh(kind: str, divisions: Sequence[int], box) -> dict:
    divisions = list(divisions)
    if kind == "voronoi":
        return {"kind": "voronoi", "n_seeds": int(np.prod(divisions)), "box": box}
    return {"kind": kind, "divisions": divisions, "box": box}


def _bar2d(divisions, mesh_kind) -> dict:
    l, h = BAR2D_LENGTH, BAR2D_HEIGHT
    c = wave_speed(STEEL_E, STEEL_RHO)
    dt = bar_time_step(l, c)
    return {
        "mesh": _box_mesh(mesh_kind or "q2s", divisions or BAR2D_DIVISIONS, [[0.0, 0.0], [l, h]]),
        "bcs": [
            {"kind": "dirichlet_fixed", "target": "xmin", "components": [True, False]},
            {"kind": "initial_velocity", "target": "all", "value": [BAR_V0, 0.0]},
        ],
        "newmark": {"dt": dt, "t_end": 4.0 * l / c},
        "probes": [{"name": "mid", "point": [0.5 * l, 0.5 * h]}, {"name": "tip", "point": [l, 0.5 * h]}],
    }


def _beam2d(divisions, mesh_kind) -> dict:
    l, h = BEAM2D_LENGTH, BEAM2D_HEIGHT
    period = cantilever_period(STEEL_E, STEEL_RHO, l, h)
    return {
        "mesh": _box_mesh(mesh_kind or "q2s", divisions or BEAM2D_DIVISIONS, [[0.0, 0.0], [l, h]]),
        "bcs": [
            {"kind": "dirichlet_fixed", "target": "xmin"},
            {"kind": "traction", "target": "xmax", "value": [0.0, -1.0 / h],
             "time_function": {"kind": "half_sine", "p_max": BEAM2D_PMAX, "period": period}},
        ],
        "newmark": {"dt": force_time_step(period), "t_end": 2.0 * period},
        "probes": [{"name": "tip", "point": [l, 0.5 * h]}],
    }


def _cook2d(divisions, mesh_kind, level) -> dict:
    n = 2 ** (COOK_LEVEL if level is None else int(level))
    period = cantilever_period(STEEL_E, STEEL_RHO, COOK_LENGTH, COOK_HEIGHT)
    return {
        "mesh": {"kind": mesh_kind or "q2s", "divisions": list(divisions or (n, n)),
                 "corners": [list(p) for p in COOK_CORNERS]},
        "bcs": [
            {"kind": "dirichlet_fixed", "target": "xmin"},
            {"kind": "traction", "target": "xmax", "value": [0.0, 1.0],
             "time_function": {"kind": "half_sine", "p_max": COOK_PMAX, "period": period}},
        ],
        "newmark": {"dt": force_time_step(period), "t_end": 2.0 * period},
        "probes": [{"name": "vertex", "point": list(COOK_CORNERS[2])}],
    }


def _bar3d(divisions, mesh_kind) -> dict:
    l, b, h = BAR3D_LENGTH, BAR3D_WIDTH, BAR3D_HEIGHT
    c = wave_speed(STEEL_E, STEEL_RHO)
    return {
        "mesh": _box_mesh(mesh_kind or "h2s", divisions or BAR3D_DIVISIONS, [[0.0, 0.0, 0.0], [l, b, h]]),
        "bcs": [
            {"kind": "dirichlet_fixed", "target": "xmin", "components": [True, False, False]},
            {"kind": "initial_velocity", "target": "all", "value": [BAR_V0, 0.0, 0.0]},
        ],
        "newmark": {"dt": bar_time_step(l, c), "t_end": 4.0 * l / c},
        "probes": [{"name": "mid", "point": [0.5 * l, 0.0, 0.0]}, {"name": "tip", "point": [l, 0.0, 0.0]}],
    }


def _beam3d(divisions, mesh_kind) -> dict:
    l, b, h = BEAM3D_LENGTH, BEAM3D_WIDTH, BEAM3D_HEIGHT
    period = cantilever_period(STEEL_E, STEEL_RHO, l, h)
    return {
        "mesh": _box_mesh(mesh_kind or "h2s", divisions or BEAM3D_DIVISIONS, [[0.0, 0.0, 0.0], [l, b, h]]),
        "bcs": [
            {"kind": "dirichlet_fixed", "target": "xmin"},
            {"kind": "traction", "target": "xmax_zmax", "value": [0.0, 0.0, -1.0],
             "time_function": {"kind": "half_sine", "p_max": BEAM3D_PMAX, "period": period}},
        ],
        "newmark": {"dt": force_time_step(period), "t_end": 2.0 * period},
        "probes": [{"name": "tip", "point": [l, 0.5 * b, h]}],
    }


def _plate3d(divisions, mesh_kind) -> dict:
    l, b, h = PLATE3D_LENGTH, PLATE3D_WIDTH, PLATE3D_HEIGHT
    period = clamped_period(STEEL_E, STEEL_RHO, l, h)
    return {
        "mesh": _box_mesh(mesh_kind or "h2s", divisions or PLATE3D_DIVISIONS, [[0.0, 0.0, 0.0], [l, b, h]]),
        "bcs": [
            {"kind": "dirichlet_fixed", "target": side} for side in ("xmin", "xmax", "ymin", "ymax")
        ] + [
            {"kind": "initial_velocity", "target": "all", "value": [0.0, 0.0, PLATE3D_V0]},
        ],
        "newmark": {"dt": force_time_step(period), "t_end": 2.0 * period},
        "probes": [{"name": "center", "point": [0.5 * l, 0.5 * b, 0.5 * h]}],
    }


def build_preset(preset, divisions: Optional[Sequence[int]] = None, mesh_kind: Optional[str] = None,
                 mass_scheme: Optional[str] = None, t_end: Optional[float] = None, dt: Optional[float] = None,
                 level: Optional[int] = None, **fields) -> SimulationConfig:
    """
    SimulationConfig of a built-in benchmark.

    Args:
        preset: BenchmarkPreset or its value
        divisions: mesh divisions override
        mesh_kind: mesh generator override (e.g. "cmesh", "voronoi", "q1")
        mass_scheme: mass integration scheme override
        t_end: end time override
        dt: time step override
        level: Cook refinement level (2^level cells per side)
        **fields: further top-level SimulationConfig fields (beta_stat, output, ...)
    """
    preset = BenchmarkPreset(preset)
    if preset == BenchmarkPreset.BAR2D:
        data = _bar2d(divisions, mesh_kind)
    elif preset == BenchmarkPreset.TRANSVERSAL_BEAM2D:
        data = _beam2d(divisions, mesh_kind)
    elif preset == BenchmarkPreset.COOKS2D:
        data = _cook2d(divisions, mesh_kind, level)
    elif preset == BenchmarkPreset.BAR3D:
        data = _bar3d(divisions, mesh_kind)
    elif preset == BenchmarkPreset.BEAM3D:
        data = _beam3d(divisions, mesh_kind)
    else:
        data = _plate3d(divisions, mesh_kind)

    data["name"] = preset.value
    data["material"] = _material()
    if mass_scheme is not None:
        data["mass_scheme"] = mass_scheme
    if t_end is not None:
        data["newmark"]["t_end"] = t_end
    if dt is not None:
        data["newmark"]["dt"] = dt
    data.update(fields)
    app_logger.debug(f"Preset {preset.value}: dt={data['newmark']['dt']:.4e} t_end={data['newmark']['t_end']:.4e}")
    return SimulationConfig.model_validate(data)


def cook_refinement(levels: Iterable[int], **overrides) -> Dict[int, SimulationConfig]:
    """Cook's membrane configs for a mesh convergence study, keyed by level."""
    return {int(level): build_preset(BenchmarkPreset.COOKS2D, level=level, **overrides) for level in levels}


# ----------------------------------------------------------------------
# history post-processing

def relative_l2(values, reference) -> float:
    """|values - reference| / |reference|"""
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    norm = np.linalg.norm(reference)
    if norm == 0.0:
        return float(np.linalg.norm(values))
    return float(np.linalg.norm(values - reference) / norm)


def _crossings(times: np.ndarray, values: np.ndarray, upward: bool) -> np.ndarray:
    s = values[:-1], values[1:]
    mask = (s[0] < 0.0) & (s[1] >= 0.0) if upward else (s[0] > 0.0) & (s[1] <= 0.0)
    idx = np.flatnonzero(mask)
    frac = values[idx] / (values[idx] - values[idx + 1])
    return times[idx] + frac * (times[idx + 1] - times[idx])


def estimate_period(times, values) -> float:
    """
    Dominant period of a history from the spacing of its upward mean crossings.

    Raises:
        ValueError: fewer than two crossings
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    crossings = _crossings(times, values - values.mean(), upward=True)
    if crossings.size < 2:
        raise ValueError("history too short to estimate a period")
    return float(np.mean(np.diff(crossings)))


def first_return_time(times, values) -> float:
    """
    First time a history that starts at zero comes back to zero after its
    first extremum.

    Raises:
        ValueError: the history never returns
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sign = np.sign(values[np.argmax(np.abs(values))])
    crossings = _crossings(times, sign * values, upward=False)
    if crossings.size == 0:
        raise ValueError("history does not return to zero")
    return float(crossings[0])


def observed_order(errors: Sequence[float], refinement: float = 2.0) -> np.ndarray:
    """Convergence orders log(e_k / e_{k+1}) / log(refinement)."""
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / math.log(refinement)
