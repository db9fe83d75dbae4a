"""Command-line front end.

    isac run|sweep|beampattern|montecarlo --config cfg.json
         [--schemes a,b] [--eta-grid 58:68:1] [--trials N] [--seed S] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 infeasible single run.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, default_config, load_config
from .harness import ExperimentSpec, run_experiment
from .optimizer import SCHEMES, InfeasibleProblemError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def parse_eta_grid(text: str) -> tuple:
    """'58:68:1' -> (58.0, 59.0, ..., 68.0); a single number is allowed."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return (float(parts[0]),)
        if len(parts) == 2:
            lo, hi = float(parts[0]), float(parts[1])
            step = 1.0
        elif len(parts) == 3:
            lo, hi, step = (float(p) for p in parts)
        else:
            raise ValueError
        if step <= 0 or hi < lo:
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad eta grid {text!r}; expected lo:hi[:step]")
    n = int(round((hi - lo) / step)) + 1
    return tuple(float(v) for v in np.linspace(lo, lo + (n - 1) * step, n))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isac")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("run", "sweep", "beampattern", "montecarlo"):
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--schemes",
                        help=f"comma-separated subset of {','.join(SCHEMES)}")
        sp.add_argument("--eta-grid", default="58:68:1",
                        help="SCNR threshold grid in dB, lo:hi[:step]")
        sp.add_argument("--trials", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None,
                        help="base seed (default: config rng_seed)")
        sp.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        schemes = tuple(s.strip() for s in args.schemes.split(",")) \
            if args.schemes else SCHEMES
        spec = ExperimentSpec(
            command=args.command,
            config=cfg,
            scheme_list=schemes,
            eta_grid=parse_eta_grid(args.eta_grid),
            trials=args.trials,
            seed_base=args.seed if args.seed is not None else cfg.rng_seed,
            output_dir=args.out,
            config_path=args.config,
        )
    except (ConfigError, ValueError) as exc:
        print(f"isac: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_experiment(spec)
    except InfeasibleProblemError as exc:
        print(f"isac: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    for path in result.files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
