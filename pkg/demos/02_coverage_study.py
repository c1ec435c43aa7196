"""
A small coverage study
======================

The same experiment the CLI ``run`` subcommand performs, scaled down so it
finishes in a couple of minutes: a fixed ground truth, many independent
trials, and the fraction of intervals that contain the true entry.
"""

from matbandit import ExperimentConfig, run_experiment
from matbandit.config import T1, T2

cfg = ExperimentConfig(d1=20, d2=20, r=3, n=1500, n_trials=100, targets=(T1, T2), checkpoints=(500,))
agg = run_experiment(cfg)

print(f"{'n':>6} {'arm':>4} {'target':>6} {'coverage':>9} {'length':>8} {'z mean':>7} {'z var':>6}")
for e in agg.entries:
    print(f"{e.n:6d} {e.arm:4d} {e.target:>6} {e.coverage:9.3f} {e.mean_ci_length:8.4f} "
          f"{e.z_mean:7.3f} {e.z_var:6.3f}")

# intervals for the difference between the arms
for d in agg.differences:
    print(f"difference n={d.n} {d.target}: coverage {d.coverage:.3f}, length {d.mean_ci_length:.4f}")

# a coarse text histogram of the standardized statistic at the last step
entry = agg.get(1, "T1")
counts = entry.histogram
edges = agg.bin_edges
for k in range(0, len(counts), 4):
    c = sum(counts[k:k + 4])
    print(f"{edges[k]:+5.2f} {'#' * c}")
