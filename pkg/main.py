"""
polyvem - finite-strain elastodynamics on polygonal and polyhedral meshes.

Command line entry point:

    polyvem run <config.json> | --preset NAME
    polyvem mesh <kind> [generator options] -o mesh.json
    polyvem verify {patch,fd,mass,rank}
    polyvem analytic {bar,period}

Exit codes: 0 success, 2 invalid input, 3 solver failure.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from config import Config
from models.config_models import SimulationConfig, validation_messages
from models.fem_models import BenchmarkPreset, MassScheme
from services.benchmarks import (
    analytical_bar_displacement,
    beam_force_period,
    build_preset,
    cantilever_period,
    wave_speed,
)
from services.mesh_generation import (
    cook_mesh,
    generate_cmesh,
    generate_structured,
    generate_voronoi_2d,
    mesh_statistics,
    random_seeds,
)
from services.mesh_io import save_mesh
from services.runner import load_config, run
from services.verification import format_report, run_suite
from utils.constants import BAR2D_LENGTH, BAR_OMEGA_FACTOR, BAR_V0, STEEL_E, STEEL_RHO
from utils.errors import InvertedElement, SolverError
from utils.logger import app_logger, set_level

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3


def _box(values: Optional[List[float]]):
    if values is None:
        return None
    if len(values) not in (4, 6):
        raise ValueError("--box takes the lower corner followed by the upper corner (4 or 6 numbers)")
    half = len(values) // 2
    return [values[:half], values[half:]]


def _cmd_run(args) -> int:
    if args.preset:
        extra = {"workers": args.workers} if args.workers is not None else {}
        config = build_preset(args.preset, divisions=args.divisions, mesh_kind=args.mesh_kind,
                              mass_scheme=args.mass_scheme, t_end=args.t_end, dt=args.dt,
                              level=args.level, **extra)
        base_dir = None
    else:
        if args.config is None:
            raise ValueError("run needs a config file or --preset")
        config = load_config(args.config)
        base_dir = Path(args.config).resolve().parent
        data = config.model_dump()
        if args.t_end is not None:
            data["newmark"]["t_end"] = args.t_end
        if args.dt is not None:
            data["newmark"]["dt"] = args.dt
        if args.mass_scheme is not None:
            data["mass_scheme"] = args.mass_scheme
        if args.workers is not None:
            data["workers"] = args.workers
        config = SimulationConfig.model_validate(data)
    result = run(config, output_dir=args.output_dir, base_dir=base_dir)
    print(f"{config.name}: {result.summary.steps} steps, "
          f"{sum(result.summary.newton_iterations)} Newton iterations, output in {result.output_dir}")
    return EXIT_OK


def _cmd_mesh(args) -> int:
    kind = args.kind
    if kind in ("q2s", "q1", "h2s", "h1", "cmesh") and (args.divisions is None or args.box is None):
        raise ValueError(f"mesh kind '{kind}' needs --divisions and --box")
    if kind == "cook":
        mesh = cook_mesh(args.level, args.cook_kind)
    elif kind == "voronoi":
        box = _box(args.box) or [[0.0, 0.0], [1.0, 1.0]]
        mesh = generate_voronoi_2d(random_seeds(args.seeds, box, args.random_seed), box)
    elif kind == "cmesh":
        mesh = generate_cmesh(args.divisions, _box(args.box), args.shift)
    else:
        mesh = generate_structured(kind, args.divisions, _box(args.box))
    path = save_mesh(mesh, args.output)
    stats = mesh_statistics(mesh)
    print(f"{path}: {stats['nodes']} nodes, {stats['elements']} elements")
    return EXIT_OK


def _cmd_verify(args) -> int:
    options = {"random_seed": args.seed}
    if args.suite == "patch":
        options["dimension"] = args.dim
        if args.mesh:
            options["meshes"] = args.mesh
    elif args.suite == "fd":
        options["n_states"] = args.states
        if args.elements and "all" not in args.elements:
            options["families"] = args.elements
    elif args.suite == "mass":
        options["n_cells"] = args.cells
    elif args.suite == "rank":
        if args.elements and "all" not in args.elements:
            options["families"] = args.elements
    rows = run_suite(args.suite, **options)
    print(format_report(rows))
    failed = [r for r in rows if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(rows)} checks FAILED")
        return 1
    print(f"all {len(rows)} checks passed")
    return EXIT_OK


def _cmd_analytic(args) -> int:
    if args.quantity == "bar":
        c = wave_speed(args.E, args.rho)
        if args.t is not None:
            times = np.asarray(args.t, dtype=float)
        else:
            t_end = args.t_end if args.t_end is not None else 4.0 * args.length / c
            times = np.linspace(0.0, t_end, args.samples)
        u = analytical_bar_displacement(args.x, times, args.v0, c, args.length, args.terms, args.omega_factor)
        print("t,u")
        for t, value in zip(np.atleast_1d(times), np.atleast_1d(u)):
            print(f"{t:{Config.CSV_FORMAT[1:]}},{value:{Config.CSV_FORMAT[1:]}}")
        return EXIT_OK
    print(f"beam_force_period = {beam_force_period(args.E, args.rho, args.length, args.b, args.h):.6e} s")
    print(f"cantilever_period = {cantilever_period(args.E, args.rho, args.length, args.h):.6e} s")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyvem", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file or a benchmark preset")
    p_run.add_argument("config", nargs="?", help="JSON simulation config")
    p_run.add_argument("--preset", choices=[p.value for p in BenchmarkPreset])
    p_run.add_argument("--divisions", type=int, nargs="+")
    p_run.add_argument("--mesh-kind", choices=["q2s", "q1", "h2s", "h1", "voronoi", "cmesh"])
    p_run.add_argument("--level", type=int, help="Cook refinement level (2^N cells per side)")
    p_run.add_argument("--mass-scheme", choices=[m.value for m in MassScheme])
    p_run.add_argument("--t-end", type=float)
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--output-dir")
    p_run.set_defaults(handler=_cmd_run)

    p_mesh = sub.add_parser("mesh", help="generate a mesh file")
    p_mesh.add_argument("kind", choices=["q2s", "q1", "h2s", "h1", "voronoi", "cmesh", "cook"])
    p_mesh.add_argument("--divisions", type=int, nargs="+")
    p_mesh.add_argument("--box", type=float, nargs="+", help="lower corner then upper corner")
    p_mesh.add_argument("--seeds", type=int, default=25, help="number of Voronoi seeds")
    p_mesh.add_argument("--random-seed", type=int, default=0)
    p_mesh.add_argument("--shift", type=float, help="C-mesh chevron offset")
    p_mesh.add_argument("--level", type=int, default=3, help="Cook refinement level")
    p_mesh.add_argument("--cook-kind", default="q2s", choices=["q2s", "q1"])
    p_mesh.add_argument("-o", "--output", required=True)
    p_mesh.set_defaults(handler=_cmd_mesh)

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=["patch", "fd", "mass", "rank"])
    p_verify.add_argument("--dim", type=int, default=2, choices=[2, 3])
    p_verify.add_argument("--mesh", nargs="+", choices=["voronoi", "q2s", "cmesh", "h2s", "h1"])
    p_verify.add_argument("--elements", nargs="+", default=["all"],
                          choices=["all", "q2s", "voronoi", "cmesh", "h2s", "h1"])
    p_verify.add_argument("--states", type=int, default=10)
    p_verify.add_argument("--cells", type=int, default=50)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(handler=_cmd_verify)

    p_analytic = sub.add_parser("analytic", help="evaluate the analytical oracles")
    p_analytic.add_argument("quantity", choices=["bar", "period"])
    p_analytic.add_argument("--x", type=float, default=0.5 * BAR2D_LENGTH)
    p_analytic.add_argument("--t", type=float, nargs="+")
    p_analytic.add_argument("--t-end", type=float)
    p_analytic.add_argument("--samples", type=int, default=101)
    p_analytic.add_argument("--v0", type=float, default=BAR_V0)
    p_analytic.add_argument("--E", type=float, default=STEEL_E)
    p_analytic.add_argument("--rho", type=float, default=STEEL_RHO)
    p_analytic.add_argument("--length", type=float, default=BAR2D_LENGTH)
    p_analytic.add_argument("--terms", type=int)
    p_analytic.add_argument("--omega-factor", type=float, default=BAR_OMEGA_FACTOR)
    p_analytic.add_argument("--b", type=float, default=1.0)
    p_analytic.add_argument("--h", type=float, default=5.0)
    p_analytic.set_defaults(handler=_cmd_analytic)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return args.handler(args)
    except ValidationError as e:
        for line in validation_messages(e):
            app_logger.error(line)
        return EXIT_INVALID
    except (SolverError, InvertedElement) as e:
        app_logger.error(f"{type(e).__name__}: {e}")
        return EXIT_SOLVER
    except (ValueError, OSError) as e:
        app_logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
