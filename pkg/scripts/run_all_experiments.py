#!/usr/bin/env python3
"""Run every bundled experiment and split the results into plot-ready curves.

At the default 200 trials the full set takes tens of minutes; pass
--trials 20 for a quick pass over everything.
"""

import argparse
import os
import sys

from bdris.cli import main as cli

EXPERIMENTS = ["freq-response", "target-shift", "per-bs-power", "network-power",
               "interference"]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", default=None)
    args = parser.parse_args()

    extra = []
    if args.trials is not None:
        extra += ["--trials", str(args.trials)]
    if args.seed is not None:
        extra += ["--seed", str(args.seed)]
    if args.config is not None:
        extra += ["--config", args.config]

    for name in EXPERIMENTS:
        print(f"== {name}")
        rc = cli(["run", name, "--out", args.out] + extra)
        if rc != 0:
            return rc
    for entry in sorted(os.listdir(args.out)):
        if entry.endswith(".csv"):
            cli(["plotdata", os.path.join(args.out, entry),
                 "--out", os.path.join(args.out, "curves")])
    return 0


if __name__ == "__main__":
    sys.exit(main())
