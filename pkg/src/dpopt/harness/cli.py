"""Command-line entry point for experiment sweeps.

Configuration comes from an optional JSON file (--config) whose keys mirror
ExperimentConfig, with individual flags overriding file values.  The sweep
always runs every (variant, epsilon, seed) cell; per-seed failures are
recorded in the report and do not affect the exit code.  Exit status is 0
when the sweep completes and 2 on configuration or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from ..optimizer import AlgorithmConstants
from .experiment import (ConfigError, ExperimentConfig, TOLERANCE_PRESETS,
                         emit_report, render_markdown, run_experiment)


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="dpopt",
        description="Run differentially private second-order optimization sweeps.")
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    parser.add_argument("--dataset", help="dataset file path, or synth:<kind>")
    parser.add_argument("--dataset-format", choices=("csv", "libsvm"))
    parser.add_argument("--preprocessing", choices=("none", "covertype", "ijcnn"))
    parser.add_argument("--loss", choices=("nonconvex_logistic", "l2_logistic", "quartic_saddle"))
    parser.add_argument("--lambda-reg", type=float, dest="lambda_reg")
    parser.add_argument("--variant", help="comma-separated list, e.g. opt,opt_ls,2opt_ls")
    parser.add_argument("--epsilon", help="comma-separated privacy levels, e.g. 0.2,0.6,1.0")
    parser.add_argument("--delta", type=float)
    parser.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2,3,4")
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--preset", choices=sorted(TOLERANCE_PRESETS),
                        help="named (eps_g, eps_h) tolerance preset")
    parser.add_argument("--eps-g", type=float, dest="eps_g")
    parser.add_argument("--eps-h", type=float, dest="eps_h")
    parser.add_argument("--synth-n", type=int, dest="synth_n")
    parser.add_argument("--synth-d", type=int, dest="synth_d")
    parser.add_argument("--zero-noise", action="store_true", default=None,
                        help="test mode: run with all noise set to zero")
    parser.add_argument("--lanczos", action="store_true", default=None,
                        help="estimate the smallest eigenvalue with randomized Lanczos")
    parser.add_argument("--out", help="report output path")
    parser.add_argument("--format", choices=("csv", "markdown"), dest="report_format")
    return parser.parse_args(argv)


def _build_config(args) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        with open(args.config) as fh:
            raw.update(json.load(fh))

    constants_kw = raw.pop("constants", {})
    if args.preset:
        constants_kw["eps_g"], constants_kw["eps_h"] = TOLERANCE_PRESETS[args.preset]
    if args.eps_g is not None:
        constants_kw["eps_g"] = args.eps_g
    if args.eps_h is not None:
        constants_kw["eps_h"] = args.eps_h
    if "eps_g" not in constants_kw or "eps_h" not in constants_kw:
        raise ConfigError("tolerances missing: set --preset, --eps-g/--eps-h, "
                          "or constants.eps_g/eps_h in the config file")

    if args.dataset:
        if args.dataset.startswith("synth:"):
            raw["synth"] = args.dataset.split(":", 1)[1]
            raw.pop("dataset_path", None)
        else:
            raw["dataset_path"] = args.dataset
            raw.pop("synth", None)
    if args.dataset_format:
        raw["dataset_format"] = args.dataset_format
    if args.preprocessing:
        raw["preprocessing"] = args.preprocessing
    if args.loss:
        raw["loss"] = args.loss
    if args.lambda_reg is not None:
        raw["lambda_reg"] = args.lambda_reg
    if args.variant:
        raw["variants"] = tuple(args.variant.split(","))
    if args.epsilon:
        raw["epsilons"] = tuple(float(e) for e in args.epsilon.split(","))
    if args.delta is not None:
        raw["delta"] = args.delta
    if args.seeds:
        raw["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.batch_size is not None:
        raw["batch_size"] = args.batch_size
    if args.synth_n is not None:
        raw["synth_n"] = args.synth_n
    if args.synth_d is not None:
        raw["synth_d"] = args.synth_d
    if args.zero_noise is not None:
        raw["zero_noise"] = True
    if args.lanczos is not None:
        raw["lanczos"] = True

    for key in ("variants", "epsilons", "seeds", "rhos"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(raw[key])
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    raw["constants"] = AlgorithmConstants(**constants_kw)
    return ExperimentConfig(**raw)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        config = _build_config(args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(config)
    except (ConfigError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(render_markdown(report), end="")
    if args.out:
        fmt = args.report_format or ("markdown" if str(args.out).endswith(".md") else "csv")
        emit_report(report, fmt, args.out)
        print(f"report written to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
