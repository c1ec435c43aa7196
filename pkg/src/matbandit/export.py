"""CSV and JSON serialization of experiment aggregates and variance-error curves."""
from __future__ import annotations

import csv
import dataclasses
import json
import math

from .harness import SCHEMA_VERSION, AggregateEntry, AggregateResult, CurveResult, DiffEntry

__all__ = ["CSV_METRICS", "aggregate_to_dict", "aggregate_from_dict", "export_results",
           "curve_to_dict", "export_curve"]

CSV_METRICS = ("coverage", "mean_ci_length", "z_mean", "z_var", "n_valid")


def _clean(value):
    # JSON has no NaN
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_clean(v) for v in value]
    return value


def _unclean(value):
    return math.nan if value is None else value


def aggregate_to_dict(agg, config=None):
    return _clean({
        "schema_version": agg.schema_version,
        "config": config.to_dict() if config is not None else None,
        "n_trials": agg.n_trials,
        "n_failed": agg.n_failed,
        "bin_edges": list(agg.bin_edges),
        "entries": [dataclasses.asdict(e) for e in agg.entries],
        "differences": [dataclasses.asdict(e) for e in agg.differences],
    })


def aggregate_from_dict(data):
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {data.get('schema_version')!r}")
    nullable = {"true_sd", "sd_error_mean", "sd_error_se"}
    entries = [AggregateEntry(**{k: (v if k in nullable else _unclean(v)) for k, v in e.items()})
               for e in data["entries"]]
    diffs = [DiffEntry(**{k: _unclean(v) for k, v in e.items()}) for e in data["differences"]]
    return AggregateResult(data["n_trials"], data["n_failed"], entries, diffs, data["bin_edges"],
                           data["schema_version"])


def _fmt(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def export_results(agg, fmt, path, config=None):
    """Write ``agg`` as JSON (full structure) or CSV (one row per arm, target, metric)."""
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(aggregate_to_dict(agg, config), fh, indent=2)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["schema_version", "n", "arm", "target", "metric", "value"])
            for e in agg.entries:
                for metric in CSV_METRICS:
                    writer.writerow([agg.schema_version, e.n, e.arm, e.target, metric, _fmt(getattr(e, metric))])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def curve_to_dict(curve, config=None):
    series = [
        {"arm": arm, "target": label, "true_sd": curve.true_sd[arm, label],
         "mean_error": curve.mean_error[arm, label], "se_error": curve.se_error[arm, label]}
        for arm, label in sorted(curve.true_sd)
    ]
    return _clean({"schema_version": SCHEMA_VERSION, "config": config.to_dict() if config else None,
                   "n_trials": curve.n_trials, "checkpoints": curve.checkpoints, "series": series})


def export_curve(curve, fmt, path, config=None):
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(curve_to_dict(curve, config), fh, indent=2)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["schema_version", "n", "arm", "target", "true_sd", "mean_error", "se_error"])
            for arm, label in sorted(curve.true_sd):
                for i, n in enumerate(curve.checkpoints):
                    writer.writerow([SCHEMA_VERSION, n, arm, label, _fmt(curve.true_sd[arm, label]),
                                     _fmt(curve.mean_error[arm, label][i]), _fmt(curve.se_error[arm, label][i])])
    else:
        raise ValueError(f"unknown format {fmt!r}")
