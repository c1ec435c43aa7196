"""Per-step driver that interleaves decisions, debiasing, SGD and variance
accumulation in a fixed order."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .debias import UnbiasedState, debias_step
from .inference import (
    VarianceAccumulators,
    accumulate_S2_lowrank,
    accumulate_sigma2,
    confidence_interval,
    difference_statistic,
    point_estimate,
    project_topr,
)
from .lowrank_sgd import balanced_factors, orthonormal_bases, sgd_update
from .exceptions import EstimatorDivergenceError
from .policy import propensity_from_gap

__all__ = ["OnlineInference", "Estimates"]

_READY, _DECIDED = "ready", "decided"


@dataclass(frozen=True)
class Estimates:
    """Projected point estimates and plug-in scales at one step count."""

    n: int
    m_hat: np.ndarray  # (2, n_targets)
    sigma_hat: np.ndarray  # (2,)
    s_hat: np.ndarray  # (2, n_targets)

    def interval(self, arm, k, level=0.95):
        return confidence_interval(self.m_hat[arm, k], self.sigma_hat[arm], self.s_hat[arm, k], self.n, level)


class OnlineInference:
    """Online decision making and inference for two arms.

    Call :meth:`propensity` with the new context, draw the action, then pass
    the reward to :meth:`update`. Inside ``update`` the debiasing step always
    sees the SGD estimates from the previous step; the SGD update runs after it.
    """

    def __init__(self, m_init, r, epsilon, schedule, targets):
        self.r = r
        self.epsilon = epsilon
        self.schedule = schedule
        self.targets = list(targets)
        self.pairs = tuple(balanced_factors(np.asarray(m, dtype=float), r) for m in m_init)
        self.m_sgd = [p.product() for p in self.pairs]
        self.unbiased = UnbiasedState.from_initial(*m_init)
        self.acc = VarianceAccumulators.empty(len(self.targets))
        self.t = 0
        self._sgd_version = 0
        self._phase = _READY
        self._pending = None

    def propensity(self, X):
        """Probability of playing arm 1 at context ``X`` under epsilon-greedy."""
        if self._phase != _READY:
            raise RuntimeError("propensity() called twice without update()")
        gap = float(np.vdot(self.m_sgd[1], X)) - float(np.vdot(self.m_sgd[0], X))
        pi = propensity_from_gap(gap, self.epsilon)
        self._phase = _DECIDED
        self._pending = (X, pi)
        return pi

    def update(self, X, a, y):
        """Consume the reward for the action taken at the pending context."""
        if self._phase != _DECIDED or self._pending[0] is not X:
            raise RuntimeError("update() must follow propensity() for the same context")
        pi = self._pending[1]
        t = self.t + 1
        assert self._sgd_version == t - 1
        debias_step(self.unbiased, self.m_sgd, X, y, a, pi)
        accumulate_sigma2(self.acc, y, self.m_sgd, X, a, pi)

        played = self.pairs[a]
        self.pairs, bp = sgd_update(self.pairs, X, y, a, pi, self.schedule(t))
        # projections of the played arm at t - 1
        basis_u, basis_v = orthonormal_bases(played, bp)
        accumulate_S2_lowrank(self.acc, X, basis_u, basis_v, a, pi, self.targets)
        self.acc.n = t

        m_new = self.pairs[a].product()
        if not np.all(np.isfinite(m_new)):
            raise EstimatorDivergenceError(f"SGD estimate of arm {a} is not finite")
        self.m_sgd[a] = m_new
        self._sgd_version = t
        self.t = t
        self._phase = _READY
        self._pending = None

    def projected(self):
        """Top-r projections of both running unbiased averages."""
        return [project_topr(self.unbiased.M_unbs[i], self.r) for i in (0, 1)]

    def estimates(self):
        """Point estimates and plug-in scales for every target at the current step."""
        proj = self.projected()
        m_hat = np.array([[point_estimate(proj[i], tg.T) for tg in self.targets] for i in (0, 1)])
        if self.t == 0:
            nan = np.full((2, len(self.targets)), np.nan)
            return Estimates(0, m_hat, np.full(2, np.nan), nan)
        sigma_hat = np.sqrt(self.acc.sigma2_hat)
        s_hat = np.sqrt(self.acc.S2_hat)
        return Estimates(self.t, m_hat, sigma_hat, s_hat)

    def difference_interval(self, k, level=0.95, estimates=None):
        est = self.estimates() if estimates is None else estimates
        return difference_statistic(est.m_hat[1, k], est.m_hat[0, k], self.acc, self.t, level, k)
