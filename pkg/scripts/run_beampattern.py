#!/usr/bin/env python3
"""Transmit/receive beampatterns versus the SCNR threshold (beampattern.csv).

The sensing-only pattern is threshold-independent and serves as the
reference; the proposed scheme's pattern approaches it as the threshold
rises.
"""

import argparse
import sys

from d2d_isac.cli import main


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--schemes", default="proposed,zero-forcing,sensing-only")
    parser.add_argument("--eta-grid", default="58:68:2")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/beampattern")
    args = parser.parse_args()

    argv = ["beampattern", "--schemes", args.schemes,
            "--eta-grid", args.eta_grid, "--seed", str(args.seed),
            "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    sys.exit(main(argv))
