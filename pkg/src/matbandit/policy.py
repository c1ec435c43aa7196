"""Epsilon-greedy action selection for the two-arm matrix bandit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EstimatorDivergenceError

__all__ = ["PolicyConfig", "propensity", "propensity_from_gap", "draw_action"]


@dataclass(frozen=True)
class PolicyConfig:
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie strictly inside (0, 1), got {self.epsilon}")


def propensity_from_gap(gap, epsilon):
    """Probability of playing arm 1 given the estimated reward gap ``<M1 - M0, X>``.

    Ties go to arm 0's side: a gap of exactly zero gives ``epsilon / 2``.
    """
    if not math.isfinite(gap):
        raise EstimatorDivergenceError(f"estimated reward gap is not finite: {gap}")
    return 1.0 - epsilon / 2 if gap > 0 else epsilon / 2


def propensity(m1_hat, m0_hat, X, epsilon):
    """Propensity of arm 1 from dense estimates of both arms."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie strictly inside (0, 1), got {epsilon}")
    gap = float(np.vdot(m1_hat, X) - np.vdot(m0_hat, X))
    return propensity_from_gap(gap, epsilon)


def draw_action(pi, rng):
    """Bernoulli(pi) draw; returns 1 with probability ``pi``."""
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"propensity must lie in [0, 1], got {pi}")
    return int(rng.random() < pi)
