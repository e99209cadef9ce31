#!/usr/bin/env python3
"""Thin wrapper around the dpopt CLI.

Example (synthetic, no privacy noise, quick smoke):

    python3 scripts/run_experiment.py --dataset synth:logistic_separable \
        --synth-n 20000 --synth-d 5 --preset covertype_loose \
        --variant opt,2opt_ls --epsilon 0.6,1.0 --seeds 0,1,2,3,4 \
        --out report.csv --format csv
"""

from dpopt.harness.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
