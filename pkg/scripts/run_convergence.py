#!/usr/bin/env python3
"""Single-seed convergence traces for every scheme (convergence.csv)."""

import argparse
import sys

from d2d_isac.cli import main


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/convergence")
    args = parser.parse_args()

    argv = ["run", "--seed", str(args.seed), "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    sys.exit(main(argv))
