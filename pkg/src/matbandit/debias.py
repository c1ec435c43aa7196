"""Online doubly-debiased estimator: a running average of one-step surrogates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lowrank_sgd import inverse_weight

__all__ = ["UnbiasedState", "debias_surrogate", "debias_step", "batch_average_oracle"]


@dataclass
class UnbiasedState:
    """Running averages ``M_unbs[i]`` after ``t`` steps; before the first step they
    hold the initial estimates, which drop out of the average at ``t = 1``."""

    M_unbs: np.ndarray  # shape (2, d1, d2)
    t: int = 0

    @classmethod
    def from_initial(cls, m_init_0, m_init_1):
        return cls(np.stack([np.array(m_init_0, dtype=float), np.array(m_init_1, dtype=float)]))


def debias_surrogate(m_sgd_prev, X, y, a, pi, arm):
    """One-step surrogate for ``arm``: the previous SGD estimate plus an
    inverse-propensity weighted residual correction (zero when ``a != arm``)."""
    w = inverse_weight(arm, pi)
    if a != arm:
        return np.array(m_sgd_prev, dtype=float)
    residual = y - float(np.vdot(m_sgd_prev, X))
    return m_sgd_prev + (w * residual) * X


def debias_step(state, m_sgd_prev, X, y, a, pi):
    """Fold step ``state.t + 1`` into both arms' running averages, in place.

    ``m_sgd_prev`` must be the pair of SGD estimates from *before* the SGD
    update that consumes ``(X, y)``.
    """
    if a not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {a!r}")
    w = inverse_weight(a, pi)
    t = state.t + 1
    residual = y - float(np.vdot(m_sgd_prev[a], X))
    # (surrogate + (t - 1) * average) / t, with the surrogate split into its two terms
    state.M_unbs *= (t - 1) / t
    state.M_unbs[0] += m_sgd_prev[0] / t
    state.M_unbs[1] += m_sgd_prev[1] / t
    state.M_unbs[a] += (w * residual / t) * X
    state.t = t
    return state


def batch_average_oracle(surrogates):
    """Plain arithmetic mean of a list of matrices."""
    if len(surrogates) == 0:
        raise ValueError("cannot average an empty list")
    return np.sum(np.stack(surrogates), axis=0) / len(surrogates)
