"""Command-line entry point.

Subcommands: run (drive a configured simulation), check (validate a
config and exit), dofs (mesh and space size report), mms (manufactured
convergence study). The config argument is either a preset name or a
path to a config file; errors come back on stderr labeled with the stage
that failed.
"""

import argparse
import logging
import os
import sys

from . import mms
from .config import PRESETS, load_preset, parse_config, validate_config
from .diagnostics import dof_report
from .driver import FixedStressDiverged, initialize, run_simulation
from .fespace import build_simulation_spaces
from .mesh import MeshError


class StageError(RuntimeError):
    """An error annotated with the pipeline stage it came from."""

    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")


def _load_config(text):
    try:
        if text in PRESETS:
            return load_preset(text)
        if not os.path.exists(text):
            raise StageError(
                "config", f"'{text}' is neither a preset nor a file; "
                f"presets are {', '.join(sorted(PRESETS))}")
        return parse_config(text)
    except StageError:
        raise
    except (ValueError, OSError) as exc:
        raise StageError("config", exc)


def _apply_overrides(config, args):
    if args.output_dir is not None:
        config.output.directory = args.output_dir
    if args.cadence is not None:
        config.output.cadence = args.cadence
    if args.seed is not None:
        config.mesh.seed = args.seed
        config.permeability.rand_seed = args.seed
    if args.max_steps is not None:
        config.time.max_steps = args.max_steps
    validate_config(config)


def cmd_run(args):
    config = _load_config(args.config)
    try:
        _apply_overrides(config, args)
    except ValueError as exc:
        raise StageError("config", exc)
    try:
        state = run_simulation(config, quiet=args.quiet)
    except (MeshError, FileNotFoundError) as exc:
        raise StageError("mesh", exc)
    except FixedStressDiverged as exc:
        raise StageError("run", exc)
    except OSError as exc:
        raise StageError("output", exc)
    if not args.quiet:
        print(f"finished after {state.step} steps, t = {state.time:g} s, "
              f"injected volume {state.injected_volume:g} m^3")
    return 0


def cmd_check(args):
    config = _load_config(args.config)
    print(f"config ok: mesh {config.mesh.nx}x{config.mesh.ny}, "
          f"{config.time.max_steps} step cap, output '{config.output.label}'")
    return 0


def cmd_dofs(args):
    config = _load_config(args.config)
    try:
        from .driver import build_mesh
        mesh = build_mesh(config)
    except (MeshError, FileNotFoundError) as exc:
        raise StageError("mesh", exc)
    spaces = build_simulation_spaces(mesh)
    for name, count in dof_report(mesh, spaces).items():
        print(f"{name:>14}  {count}")
    return 0


def cmd_mms(args):
    if args.case == "darcy":
        result = mms.darcy_convergence()
        print("mixed Darcy manufactured solution")
        print(f"{'level':>6} {'h':>10} {'E_v':>12} {'order':>7} "
              f"{'E_p':>12} {'order':>7}")
        vo = ["-"] + [f"{o:.3f}" for o in result["velocity_orders"]]
        po = ["-"] + [f"{o:.3f}" for o in result["pressure_orders"]]
        for i, n in enumerate(result["levels"]):
            print(f"{n:>6} {result['h'][i]:>10.4e} "
                  f"{result['velocity_errors'][i]:>12.4e} {vo[i]:>7} "
                  f"{result['pressure_errors'][i]:>12.4e} {po[i]:>7}")
        print(f"least-squares slopes: velocity {result['velocity_slope']:.3f}, "
              f"pressure {result['pressure_slope']:.3f}")
    else:
        result = mms.transport_convergence()
        print("enriched-Galerkin transport manufactured solution")
        print(f"{'level':>6} {'h':>10} {'E_c':>12} {'order':>7}")
        co = ["-"] + [f"{o:.3f}" for o in result["orders"]]
        for i, n in enumerate(result["levels"]):
            print(f"{n:>6} {result['h'][i]:>10.4e} "
                  f"{result['errors'][i]:>12.4e} {co[i]:>7}")
        print(f"least-squares slope: {result['slope']:.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="porochem",
        description="Coupled flow, mechanics, and reactive transport in a "
        "deforming porous medium.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_command(name, help_text, func):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="preset name or config file path")
        p.set_defaults(func=func)
        return p

    p_run = add_config_command("run", "drive a simulation", cmd_run)
    p_run.add_argument("--output-dir", help="override the output directory")
    p_run.add_argument("--cadence", type=int, metavar="N",
                       help="write fields every N steps")
    p_run.add_argument("--seed", type=int, metavar="S",
                       help="override mesh and field seeds")
    p_run.add_argument("--max-steps", type=int, metavar="N",
                       help="stop after N steps")
    p_run.add_argument("--quiet", action="store_true",
                       help="suppress per-step progress")

    add_config_command("check", "validate a config and exit", cmd_check)
    add_config_command("dofs", "report mesh and space sizes", cmd_dofs)

    p_mms = sub.add_parser("mms", help="manufactured convergence study")
    p_mms.add_argument("case", choices=("darcy", "transport"))
    p_mms.set_defaults(func=cmd_mms)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False)
        else logging.INFO,
        format="%(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
