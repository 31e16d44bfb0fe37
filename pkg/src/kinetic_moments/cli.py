"""Command-line driver for regularization sweeps.

Example::

    kinetic-moments --N 5 --M0 5 --sigma-s 1 --cells 40 \\
        --gamma-list 1e-3,1e-4,1e-5,1e-6 --format markdown

A ``--config`` file holds ``key = value`` lines whose keys are the long flag
names without dashes (``sigma-s = 1``); flags on the command line win.
"""
import argparse
import logging
import os
import sys

from .dual import SolverConfig
from .sweep import emit_table, parse_gamma_list, results_json, run_sweep
from .transport import RunConfig


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            values[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    return values


def build_parser():
    p = argparse.ArgumentParser(
        prog="kinetic-moments",
        description="Reference and regularized entropy-based moment runs with error tables.",
    )
    p.add_argument("--config", help="key = value file with default flag values")
    p.add_argument("--entropy", choices=["mb", "be", "burg"], default="mb")
    p.add_argument("--N", type=int, default=5, help="highest moment degree")
    p.add_argument("--M0", type=float, default=5.0, help="initial-condition amplitude")
    p.add_argument("--sigma-s", type=float, default=1.0)
    p.add_argument("--gamma-list", default="1e-3,1e-4,1e-5,1e-6,1e-7,1e-8",
                   help="comma-separated, strictly decreasing; 1e-9.25 means 10^-9.25")
    p.add_argument("--cells", type=int, default=40)
    p.add_argument("--dg-degree", type=int, default=3)
    p.add_argument("--cfl", type=float, default=0.9)
    p.add_argument("--final-time", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=1e-8)
    p.add_argument("--tau-desired", type=float, default=1e-11)
    p.add_argument("--ell-max", type=int, default=10)
    p.add_argument("--quad-order", type=int, default=None)
    p.add_argument("--out", help="table output path; results JSON and checkpoints go next to it")
    p.add_argument("--format", choices=["csv", "markdown"], default="csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--source-form", choices=["regularized", "original"], default="regularized")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv=None):
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config:
        known = {a.dest for a in parser._actions}
        values = read_config_file(args.config)
        unknown = set(values) - known
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(sorted(unknown))}")
        parser.set_defaults(**values)
    args = parser.parse_args(argv)
    # defaults coming from a config file are strings; run them through the types
    for action in parser._actions:
        val = getattr(args, action.dest, None)
        if isinstance(val, str) and action.type is not None:
            setattr(args, action.dest, action.type(val))
        if action.choices and getattr(args, action.dest, None) not in action.choices:
            parser.error(f"--{action.dest}: invalid choice {getattr(args, action.dest)!r}")
    return args


def config_from_args(args):
    solver = SolverConfig(tau=args.tau, tau_desired=args.tau_desired, ell_max=args.ell_max)
    return RunConfig(
        N=args.N, M0=args.M0, sigma_s=args.sigma_s, gamma=0.0, n_cells=args.cells,
        dg_degree=args.dg_degree, cfl=args.cfl, final_time=args.final_time, solver=solver,
        entropy=args.entropy, quad_order=args.quad_order, source_form=args.source_form,
    )


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = config_from_args(args)
    gammas = parse_gamma_list(args.gamma_list)

    out_dir = None
    if args.out:
        stem = os.path.splitext(args.out)[0]
        out_dir = stem + "_checkpoints"
    records, _ = run_sweep(cfg, gammas, workers=args.workers, out_dir=out_dir)
    table = emit_table(records, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
        with open(os.path.splitext(args.out)[0] + ".results.json", "w") as fh:
            fh.write(results_json(cfg, records))
    else:
        sys.stdout.write(table)
    return 2 if any(r.failed for r in records) else 0


if __name__ == "__main__":
    sys.exit(main())
