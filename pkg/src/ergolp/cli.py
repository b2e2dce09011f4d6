"""Command-line interface.

Subcommands:
  solve <config>      run whatever mode the config selects
  schedule <config>   run a config whose mode must be schedule
  sweep <config>      run a config whose mode must be pinned_sweep
  oracle <kind> ...   print analytic Cheeger values for a convex domain

Exit codes: 0 success, 1 configuration or input error, 2 infeasible problem,
3 failure to converge (solver iteration cap, non-closing extraction, blocked
steering).  Errors print one line ``error: <reason>`` on stderr.

The only environment variable honored is ERGOLP_THREADS, which caps the
numeric libraries' thread pools; it must be read before numpy loads, so this
module defers heavy imports into main().
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_env():
    threads = os.environ.get("ERGOLP_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ergolp",
        description="Long-run average-cost planar control via occupational-measure LPs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (
        ("solve", "run the mode selected by the config file"),
        ("schedule", "run a schedule-mode config"),
        ("sweep", "run a pinned-sweep config"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("config", help="path to the run configuration")
        cmd.add_argument("--emit-svg", metavar="PATH", help="write an SVG overlay")
        cmd.add_argument("--emit-csv", metavar="DIR", help="write CSV artifacts")
        cmd.add_argument("--quiet", action="store_true", help="suppress the summary")

    oracle = sub.add_parser("oracle", help="print analytic Cheeger values")
    oracle.add_argument("kind", choices=("rectangle", "disk", "polygon"))
    oracle.add_argument("params", nargs="+", help="rectangle W H | disk R | polygon 'x,y; ...'")
    oracle.add_argument("--quiet", action="store_true")
    return parser


def _oracle_command(args):
    from .config import parse_points
    from .geometry import ConvexPolygon, Disk, Rectangle
    from .oracles import cheeger_constant

    if args.kind == "rectangle":
        domain = Rectangle(float(args.params[0]), float(args.params[1]))
    elif args.kind == "disk":
        domain = Disk(float(args.params[0]))
    else:
        domain = ConvexPolygon(parse_points(" ".join(args.params)))
    r_star, v_star, h_star = cheeger_constant(domain)
    if not args.quiet:
        print(f"r_star = {r_star:.12g}")
        print(f"v_star = {v_star:.12g}")
        print(f"h_star = {h_star:.12g}")
    return 0


def _solve_command(args, forced_mode=None):
    from .config import ConfigError, load_config
    from .runner import run_config

    cfg = load_config(args.config)
    if forced_mode is not None and cfg.mode != forced_mode:
        raise ConfigError(f"{args.config} has mode {cfg.mode!r}; expected {forced_mode!r}")
    summary, _ = run_config(cfg, svg_path=args.emit_svg, csv_dir=args.emit_csv)
    if not args.quiet:
        sys.stdout.write(summary.text())
    return 0


def main(argv=None):
    _apply_thread_env()
    args = build_parser().parse_args(argv)

    from . import curves, simplex
    from .config import ConfigError
    from .expr import EvalError, ParseError

    try:
        if args.command == "oracle":
            return _oracle_command(args)
        forced = {"schedule": "schedule", "sweep": "pinned_sweep"}.get(args.command)
        return _solve_command(args, forced_mode=forced)
    except simplex.InfeasibleError as err:
        print(f"error: infeasible: {err}", file=sys.stderr)
        return 2
    except (simplex.NoConvergenceError, simplex.UnboundedError,
            curves.ExtractionError, curves.SteeringError,
            curves.ConstructionError) as err:
        print(f"error: no-convergence: {err}", file=sys.stderr)
        return 3
    except (ConfigError, ParseError, EvalError, ValueError, OSError) as err:
        print(f"error: config: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
