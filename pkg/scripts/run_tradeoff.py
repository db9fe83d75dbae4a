#!/usr/bin/env python3
"""Monte Carlo rate-versus-threshold sweep over all schemes (sweep.csv,
trials.csv). Fifty trials over the default grid takes on the order of ten
minutes on one core."""

import argparse
import sys

from d2d_isac.cli import main


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--eta-grid", default="58:68:1")
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/tradeoff")
    args = parser.parse_args()

    argv = ["sweep", "--eta-grid", args.eta_grid,
            "--trials", str(args.trials), "--seed", str(args.seed),
            "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    sys.exit(main(argv))
