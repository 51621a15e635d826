"""Command line front end: run experiments, validate configs, list presets.

Usage:
    graphspde run <config-file> [--seed S] [--paths P] [--out-dir D] [--threads N]
    graphspde validate <config-file>
    graphspde presets

The default output directory comes from the GRAPHSPDE_OUT_DIR environment
variable, falling back to ./graphspde_out.  Exit status is 0 when every
asserted property passed, 1 otherwise, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, parse_config, preset_names, run_experiment

_PRESET_HELP = {
    "single": "one absorbing node, unit rate and mass",
    "path_<n>": "path graph, unit conductances, unit killing on every node",
    "complete_<n>": "complete graph with conductance 1/n and unit killing",
}


def _default_out_dir() -> str:
    return os.environ.get("GRAPHSPDE_OUT_DIR", "graphspde_out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphspde",
        description="experiments for stochastic nonlinear diffusion on "
                    "graph Dirichlet spaces")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("config", help="path to the config file")
    run.add_argument("--seed", type=int, help="override run.seed")
    run.add_argument("--paths", type=int, help="override run.paths")
    run.add_argument("--out-dir", default=_default_out_dir(),
                     help="artifact directory (default: GRAPHSPDE_OUT_DIR "
                          "or ./graphspde_out)")
    run.add_argument("--threads", type=int, default=1,
                     help="worker hint; results never depend on it")

    val = sub.add_parser("validate", help="parse a config and report all "
                                          "violations")
    val.add_argument("config", help="path to the config file")

    sub.add_parser("presets", help="list named preset spaces")
    return parser


def _load(path: str):
    text = Path(path).read_text()
    return parse_config(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "presets":
        for name in preset_names():
            print(f"{name:15s} {_PRESET_HELP[name]}")
        return 0

    try:
        cfg = _load(args.config)
        if args.command == "run":
            if args.seed is not None:
                cfg.entries[("run", "seed")] = str(args.seed)
            if args.paths is not None:
                cfg.entries[("run", "paths")] = str(args.paths)
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 2
    except ConfigError as err:
        print("configuration problems:", file=sys.stderr)
        for problem in err.problems:
            print(f"  - {problem}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print("configuration ok")
        sys.stdout.write(cfg.normalize())
        return 0

    status = run_experiment(cfg, args.out_dir, threads=args.threads)
    print(f"experiment {cfg.experiment}: "
          f"{'all checks passed' if status == 0 else 'CHECKS FAILED'} "
          f"(artifacts in {args.out_dir})")
    return status


if __name__ == "__main__":
    sys.exit(main())
