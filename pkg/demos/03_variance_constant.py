"""
The asymptotic variance constant
================================

The limiting variance of the estimate for arm ``i`` is ``sigma_i^2 S_i^2 / n``.
``S_i^2`` is an integral over contexts; here it is computed by Monte Carlo and
compared with an exact expression that holds for Gaussian contexts, where the
squared projection is independent of which side of the decision boundary
the context falls on.
"""

import numpy as np

from matbandit import ExperimentConfig, s2_closed_form, true_S2_oracle
from matbandit.harness import make_truth

cfg = ExperimentConfig()
truth = make_truth(cfg)
rng = np.random.default_rng(0)

for spec in cfg.build_targets():
    for eps in (0.05, 0.1, 0.5):
        for arm in (0, 1):
            mc, se = true_S2_oracle(truth, spec.T, arm, eps, 200_000, rng)
            exact = s2_closed_form(truth, spec.T, arm, eps)
            print(f"{spec.label} eps={eps:<4} arm {arm}: MC {mc:8.4f} +/- {se:.4f}   exact {exact:8.4f}")

# less exploration means rarer pulls of the worse arm and a larger constant
eps = np.linspace(0.02, 0.98, 7)
s2 = [s2_closed_form(truth, cfg.build_targets()[0].T, 1, e) for e in eps]
for e, v in zip(eps, s2):
    print(f"eps={e:.2f}  S^2={v:.4f}  sigma*S={0.1 * np.sqrt(v):.4f}")
