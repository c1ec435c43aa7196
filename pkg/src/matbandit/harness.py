"""Seeded Monte Carlo experiments: single trials, aggregates over trials and
the variance-error curve."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import TrialError
from .inference import true_S2_oracle
from .model import generate_ground_truth, realize_reward, sample_context
from .offline_init import collect_offline, nuclear_norm_estimate
from .online import OnlineInference
from .policy import draw_action

__all__ = [
    "Record",
    "DiffRecord",
    "TrialResult",
    "AggregateEntry",
    "DiffEntry",
    "AggregateResult",
    "CurveResult",
    "HIST_EDGES",
    "make_truth",
    "initial_estimates",
    "run_trial",
    "run_trials",
    "aggregate",
    "run_experiment",
    "true_sd",
    "variance_error_curve",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HIST_EDGES = np.linspace(-4.0, 4.0, 62)
MAX_FAILURE_RATE = 0.01

# spawn keys separating the random streams derived from one integer seed
_TRIAL, _TRUTH, _INIT, _ORACLE = 0, 1, 2, 3


def _rng(entropy, stream):
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(stream,)))


@dataclass(frozen=True)
class Record:
    """One arm and target at step count ``n`` of one trial."""

    n: int
    arm: int
    target: str
    m_hat: float
    m_true: float
    sd_hat: float  # sigma_hat * S_hat
    lower: float
    upper: float
    covered: bool
    z: float


@dataclass(frozen=True)
class DiffRecord:
    n: int
    target: str
    point: float
    truth: float
    lower: float
    upper: float
    covered: bool


@dataclass(frozen=True)
class TrialResult:
    seed: int
    records: tuple
    diff_records: tuple
    sgd_error: tuple
    cumulative_reward: float
    pulls: tuple


def make_truth(config, entropy=None):
    entropy = (config.truth_seed if config.truth_seed is not None else config.base_seed) if entropy is None else entropy
    rng = _rng(entropy, _TRUTH)
    return generate_ground_truth(config.d1, config.d2, config.r, config.singular_values(0),
                                 config.singular_values(1), config.sigma_0, config.sigma_1, rng)


def initial_estimates(config, truth, rng):
    """Offline uniform-exploration phase followed by nuclear-norm regression per arm."""
    batch = collect_offline(truth, config.n0, rng)
    out = []
    for arm in (0, 1):
        lam = config.lambda_for(truth.sigma[arm], len(batch.y[arm]))
        res = nuclear_norm_estimate(batch.X[arm], batch.y[arm], lam, config.init_max_iter, config.init_tol, rng)
        out.append(res.M)
    return out


def _snapshot(engine, truth, targets, level, n):
    records, diffs = [], []
    est = engine.estimates()
    for k, tg in enumerate(targets):
        for arm in (0, 1):
            m_true = truth.linear_form(arm, tg.T)
            m_hat = float(est.m_hat[arm, k])
            sd = float(est.sigma_hat[arm] * est.s_hat[arm, k]) if n else math.nan
            try:
                ci = est.interval(arm, k, level)
            except ValueError:
                records.append(Record(n, arm, tg.label, m_hat, m_true, sd, math.nan, math.nan, False, math.nan))
                continue
            records.append(Record(n, arm, tg.label, m_hat, m_true, sd, ci.lower, ci.upper,
                                  ci.covers(m_true), ci.standardized(m_true)))
        diff_true = truth.linear_form(1, tg.T) - truth.linear_form(0, tg.T)
        try:
            dci = engine.difference_interval(k, level, est)
            diffs.append(DiffRecord(n, tg.label, dci.point, diff_true, dci.lower, dci.upper, dci.covers(diff_true)))
        except ValueError:
            point = float(est.m_hat[1, k] - est.m_hat[0, k])
            diffs.append(DiffRecord(n, tg.label, point, diff_true, math.nan, math.nan, False))
    return records, diffs


def run_trial(config, truth, seed, m_init=None):
    """Run the online procedure for ``config.n`` steps.

    Parameters
    ----------
    config : ExperimentConfig
    truth : GroundTruth
    seed : int
        Entropy of this trial's random stream.
    m_init : pair of ndarray, optional
        Initial estimates; when omitted an offline phase is run on the
        trial's own stream.

    Returns
    -------
    TrialResult
    """
    rng = _rng(seed, _TRIAL)
    if m_init is None:
        m_init = initial_estimates(config, truth, rng)
    targets = config.build_targets()
    engine = OnlineInference(m_init, config.r, config.epsilon, config.schedule(), targets)
    report = set(config.report_points())
    records, diffs = [], []
    reward = 0.0
    pulls = [0, 0]
    t = 0
    try:
        if 0 in report:
            r_, d_ = _snapshot(engine, truth, targets, config.level, 0)
            records += r_
            diffs += d_
        for t in range(1, config.n + 1):
            X = sample_context(config.d1, config.d2, rng)
            pi = engine.propensity(X)
            a = draw_action(pi, rng)
            y, _ = realize_reward(truth, X, a, rng)
            engine.update(X, a, y)
            reward += y
            pulls[a] += 1
            if t in report:
                r_, d_ = _snapshot(engine, truth, targets, config.level, t)
                records += r_
                diffs += d_
    except Exception as exc:  # noqa: BLE001 - annotate and hand to the runner
        raise TrialError(t, exc) from exc
    sgd_error = tuple(float(np.linalg.norm(engine.m_sgd[i] - truth.M[i])) for i in (0, 1))
    return TrialResult(int(seed), tuple(records), tuple(diffs), sgd_error, reward, tuple(pulls))


def _trial_job(args):
    config, truth, seed, m_init = args
    if config.resample_truth:
        truth = make_truth(config, entropy=seed)
    if config.resample_init:
        m_init = None
    elif m_init is None:
        m_init = initial_estimates(config, truth, _rng(seed, _INIT))
    try:
        return run_trial(config, truth, seed, m_init)
    except TrialError as exc:
        return exc


def _shared_setup(config):
    truth = make_truth(config)
    m_init = None
    if not (config.resample_init or config.resample_truth):
        entropy = config.truth_seed if config.truth_seed is not None else config.base_seed
        m_init = initial_estimates(config, truth, _rng(entropy, _INIT))
    return truth, m_init


def run_trials(config, truth=None, m_init=None):
    """Run ``config.n_trials`` trials with seeds ``base_seed + k``.

    Returns ``(results, failures)``; ``results`` is ordered by ``k`` regardless
    of ``config.parallelism``.
    """
    if truth is None:
        truth, shared = _shared_setup(config)
        m_init = shared if m_init is None else m_init
    jobs = [(config, truth, config.base_seed + k, m_init) for k in range(config.n_trials)]
    if config.parallelism == 1:
        outcomes = [_trial_job(job) for job in jobs]
    else:
        chunk = max(1, len(jobs) // (4 * config.parallelism))
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(_trial_job, jobs, chunksize=chunk))
    results = [o for o in outcomes if isinstance(o, TrialResult)]
    failures = [o for o in outcomes if not isinstance(o, TrialResult)]
    for f in failures:
        log.warning("trial failed: %s", f)
    if len(failures) > MAX_FAILURE_RATE * config.n_trials:
        raise RuntimeError(f"{len(failures)} of {config.n_trials} trials failed; first: {failures[0]}")
    return results, failures


@dataclass
class AggregateEntry:
    n: int
    arm: int
    target: str
    n_valid: int
    coverage: float
    mean_ci_length: float
    z_mean: float
    z_var: float
    histogram: list
    m_true: float
    mean_sd_hat: float
    true_sd: float | None = None
    sd_error_mean: float | None = None
    sd_error_se: float | None = None


@dataclass
class DiffEntry:
    n: int
    target: str
    n_valid: int
    coverage: float
    mean_ci_length: float


@dataclass
class AggregateResult:
    n_trials: int
    n_failed: int
    entries: list
    differences: list
    bin_edges: list = field(default_factory=lambda: HIST_EDGES.tolist())
    schema_version: int = SCHEMA_VERSION

    def get(self, arm, target, n=None):
        matches = [e for e in self.entries if e.arm == arm and e.target == target and (n is None or e.n == n)]
        if not matches:
            raise KeyError((arm, target, n))
        return max(matches, key=lambda e: e.n)

    def get_difference(self, target, n=None):
        matches = [e for e in self.differences if e.target == target and (n is None or e.n == n)]
        if not matches:
            raise KeyError((target, n))
        return max(matches, key=lambda e: e.n)


def _mean(values):
    return float(np.mean(values)) if len(values) else math.nan


def aggregate(results, n_failed=0, true_sds=None):
    """Combine trial results; ``true_sds[(arm, label)]`` enables the sd-error column."""
    groups = {}
    for res in results:
        for rec in res.records:
            groups.setdefault((rec.n, rec.arm, rec.target), []).append(rec)
    entries = []
    for (n, arm, target), recs in sorted(groups.items(), key=lambda kv: kv[0]):
        valid = [r for r in recs if math.isfinite(r.z)]
        z = np.array([r.z for r in valid])
        counts, _ = np.histogram(np.clip(z, HIST_EDGES[0], HIST_EDGES[-1]), bins=HIST_EDGES)
        entry = AggregateEntry(
            n=n, arm=arm, target=target, n_valid=len(valid),
            coverage=_mean([r.covered for r in valid]),
            mean_ci_length=_mean([r.upper - r.lower for r in valid]),
            z_mean=_mean(z),
            z_var=float(np.var(z, ddof=1)) if len(z) > 1 else math.nan,
            histogram=counts.tolist(),
            m_true=recs[0].m_true,
            mean_sd_hat=_mean([r.sd_hat for r in recs if math.isfinite(r.sd_hat)]),
        )
        if true_sds is not None and (arm, target) in true_sds:
            errs = np.array([abs(r.sd_hat - true_sds[arm, target]) for r in recs if math.isfinite(r.sd_hat)])
            entry.true_sd = float(true_sds[arm, target])
            entry.sd_error_mean = _mean(errs)
            entry.sd_error_se = float(np.std(errs, ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else math.nan
        entries.append(entry)
    dgroups = {}
    for res in results:
        for rec in res.diff_records:
            dgroups.setdefault((rec.n, rec.target), []).append(rec)
    diffs = []
    for (n, target), recs in sorted(dgroups.items(), key=lambda kv: kv[0]):
        valid = [r for r in recs if math.isfinite(r.lower)]
        diffs.append(DiffEntry(n, target, len(valid), _mean([r.covered for r in valid]),
                               _mean([r.upper - r.lower for r in valid])))
    return AggregateResult(len(results), n_failed, entries, diffs)


def run_experiment(config, true_sds=None):
    """Run all trials of ``config`` and aggregate them."""
    results, failures = run_trials(config)
    return aggregate(results, len(failures), true_sds)


def true_sd(config, truth, mc_samples=None):
    """``sigma_i S_i`` for every arm and target, with ``S_i^2`` by Monte Carlo."""
    entropy = config.truth_seed if config.truth_seed is not None else config.base_seed
    rng = _rng(entropy, _ORACLE)
    samples = config.oracle_samples if mc_samples is None else mc_samples
    out = {}
    for tg in config.build_targets():
        for arm in (0, 1):
            s2, _ = true_S2_oracle(truth, tg.T, arm, config.epsilon, samples, rng)
            out[arm, tg.label] = truth.sigma[arm] * math.sqrt(s2)
    return out


@dataclass
class CurveResult:
    checkpoints: list
    true_sd: dict  # (arm, label) -> sigma * S
    mean_error: dict  # (arm, label) -> list over checkpoints
    se_error: dict
    n_trials: int


def variance_error_curve(config, checkpoints, mc_samples=None):
    """Mean ``|sigma_hat S_hat - sigma S|`` over trials at each checkpoint."""
    checkpoints = sorted({int(c) for c in checkpoints})
    if not checkpoints or checkpoints[0] < 1:
        raise ValueError("checkpoints must be positive step counts")
    cfg = config.replace(n=checkpoints[-1], checkpoints=tuple(checkpoints))
    truth, m_init = _shared_setup(cfg)
    sds = true_sd(cfg, truth, mc_samples)
    results, failures = run_trials(cfg, truth, m_init)
    agg = aggregate(results, len(failures), sds)
    mean_error, se_error = {}, {}
    for key in sds:
        arm, label = key
        mean_error[key] = [agg.get(arm, label, c).sd_error_mean for c in checkpoints]
        se_error[key] = [agg.get(arm, label, c).sd_error_se for c in checkpoints]
    return CurveResult(checkpoints, sds, mean_error, se_error, len(results))
