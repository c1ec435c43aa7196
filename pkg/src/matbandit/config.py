"""Experiment configuration and its flat TOML file format.

Example file::

    d1 = 50
    d2 = 50
    r = 3
    n = 3000
    epsilon = 0.1
    sigma_0 = 0.1
    sigma_1 = 0.1
    n_trials = 500
    base_seed = 0
    checkpoints = [1000, 2000]
    targets = [
      {label = "T1", entries = [[0, 0, 1.0]]},
      {label = "T2", entries = [[0, 0, 1.0], [1, 1, 2.0], [2, 2, -3.0]]},
    ]

Target entries are ``[row, column, weight]`` with 0-based indices.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .inference import InferenceTarget
from .lowrank_sgd import StepSizeSchedule, theory_t_star
from .offline_init import default_lambda
from .policy import PolicyConfig

__all__ = ["TargetSpec", "ExperimentConfig", "load_config", "T1", "T2"]


@dataclass(frozen=True)
class TargetSpec:
    label: str
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(a), int(b), float(w)) for a, b, w in self.entries))

    def build(self, d1, d2):
        return InferenceTarget.from_entries(d1, d2, self.entries, self.label)


T1 = TargetSpec("T1", ((0, 0, 1.0),))
T2 = TargetSpec("T2", ((0, 0, 1.0), (1, 1, 2.0), (2, 2, -3.0)))

# fields that change how a run executes but not what it computes
RUNTIME_FIELDS = ("parallelism", "output", "output_format")


@dataclass(frozen=True)
class ExperimentConfig:
    d1: int = 50
    d2: int = 50
    r: int = 3
    n: int = 3000
    epsilon: float = 0.1
    sigma_0: float = 0.1
    sigma_1: float = 0.1
    singular_values_0: tuple | None = None
    singular_values_1: tuple | None = None
    step_c: float = 0.1
    step_alpha: float = 0.99
    step_t_star: int | None = None
    step_gamma: float = 1.0
    n0: int = 2000
    init_lambda: float | None = None
    init_max_iter: int = 500
    init_tol: float = 1e-6
    targets: tuple = (T1,)
    level: float = 0.95
    n_trials: int = 1
    base_seed: int = 0
    truth_seed: int | None = None
    resample_truth: bool = False
    resample_init: bool = False
    checkpoints: tuple = ()
    oracle_samples: int = 1_000_000
    parallelism: int = 1
    output: str | None = None
    output_format: str = "json"

    def __post_init__(self):
        targets = tuple(t if isinstance(t, TargetSpec) else TargetSpec(**t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "checkpoints", tuple(sorted({int(c) for c in self.checkpoints})))
        for name in ("singular_values_0", "singular_values_1"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(v) for v in value))
        if min(self.d1, self.d2, self.r) < 1 or self.r > min(self.d1, self.d2):
            raise ValueError("need 1 <= r <= min(d1, d2)")
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if any(c < 0 or c > self.n for c in self.checkpoints):
            raise ValueError("checkpoints must lie in [0, n]")
        if self.output_format not in ("json", "csv"):
            raise ValueError("output_format must be 'json' or 'csv'")
        PolicyConfig(self.epsilon)
        self.schedule()

    def t_star(self):
        """Burn-in floor of the step size; derived from ``step_gamma`` when unset."""
        if self.step_t_star is not None:
            return int(self.step_t_star)
        return theory_t_star(self.step_gamma, max(self.d1, self.d2), self.r, self.step_alpha)

    def schedule(self):
        return StepSizeSchedule(self.step_c, self.step_alpha, self.t_star())

    def singular_values(self, arm):
        value = self.singular_values_1 if arm else self.singular_values_0
        return np.ones(self.r) if value is None else np.array(value)

    def build_targets(self):
        return [t.build(self.d1, self.d2) for t in self.targets]

    def lambda_for(self, sigma, n_arm):
        return self.init_lambda if self.init_lambda is not None else default_lambda(sigma, self.d1, self.d2, n_arm)

    def report_points(self):
        """Step counts at which per-trial estimates are recorded."""
        return tuple(sorted(set(self.checkpoints) | {self.n}))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self, include_runtime=False):
        out = {}
        for f in dataclasses.fields(self):
            if not include_runtime and f.name in RUNTIME_FIELDS:
                continue
            value = getattr(self, f.name)
            if f.name == "targets":
                value = [{"label": t.label, "entries": [list(e) for e in t.entries]} for t in value]
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path, **overrides):
    """Read a TOML config file; ``overrides`` that are not None replace file values."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)
