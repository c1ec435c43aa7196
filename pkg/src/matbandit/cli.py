"""Command line entry point: ``matbandit {run,curve,oracle-s2}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import ExperimentConfig, load_config
from .export import aggregate_to_dict, curve_to_dict, export_curve, export_results
from .harness import make_truth, run_experiment, variance_error_curve
from .inference import s2_closed_form, true_S2_oracle


def _common(p):
    p.add_argument("--config", help="TOML config file (defaults to the built-in simulation setup)")
    p.add_argument("--trials", type=int, dest="n_trials")
    p.add_argument("--seed", type=int, dest="base_seed")
    p.add_argument("--threads", type=int, dest="parallelism")
    p.add_argument("--out", dest="output")
    p.add_argument("--format", choices=("csv", "json"), dest="output_format")
    p.add_argument("--level", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("-n", type=int, dest="n", help="number of online steps")


def _config(args):
    keys = ("n_trials", "base_seed", "parallelism", "output", "output_format", "level", "epsilon", "n")
    overrides = {k: getattr(args, k, None) for k in keys}
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _emit(payload, cfg, writer, obj):
    if cfg.output:
        writer(obj, cfg.output_format, cfg.output, cfg)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_run(args):
    cfg = _config(args)
    agg = run_experiment(cfg)
    _emit(aggregate_to_dict(agg, cfg), cfg, export_results, agg)


def cmd_curve(args):
    cfg = _config(args)
    checkpoints = args.checkpoints or list(range(50, cfg.n + 1, 50))
    curve = variance_error_curve(cfg, checkpoints, args.mc_samples)
    _emit(curve_to_dict(curve, cfg), cfg, export_curve, curve)


def cmd_oracle(args):
    cfg = _config(args)
    truth = make_truth(cfg)
    rng = np.random.default_rng(args.mc_seed)
    rows = []
    for tg in cfg.build_targets():
        for arm in (0, 1):
            est, se = true_S2_oracle(truth, tg.T, arm, cfg.epsilon, args.mc_samples or cfg.oracle_samples, rng)
            rows.append({"arm": arm, "target": tg.label, "S2": est, "se": se,
                         "S2_closed_form": s2_closed_form(truth, tg.T, arm, cfg.epsilon),
                         "sigma_S": truth.sigma[arm] * est**0.5})
    json.dump({"schema_version": 1, "config": cfg.to_dict(), "oracle": rows}, sys.stdout, indent=2)
    sys.stdout.write("\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="matbandit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="Monte Carlo coverage experiment")
    _common(run)
    run.set_defaults(func=cmd_run)
    curve = sub.add_parser("curve", help="variance-estimation error against n")
    _common(curve)
    curve.add_argument("--checkpoints", type=int, nargs="+")
    curve.add_argument("--mc-samples", type=int)
    curve.set_defaults(func=cmd_curve)
    oracle = sub.add_parser("oracle-s2", help="Monte Carlo asymptotic variance constant")
    _common(oracle)
    oracle.add_argument("--mc-samples", type=int)
    oracle.add_argument("--mc-seed", type=int, default=0)
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
