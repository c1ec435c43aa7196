"""Linear-form inference: projection, point estimates, online variance
estimates, confidence intervals and a Monte Carlo reference for the
asymptotic variance constant."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .lowrank_sgd import inverse_weight

__all__ = [
    "InferenceTarget",
    "VarianceAccumulators",
    "IntervalEstimate",
    "accumulate_sigma2",
    "accumulate_S2",
    "accumulate_S2_lowrank",
    "s2_integrand",
    "project_topr",
    "point_estimate",
    "normal_quantile",
    "confidence_interval",
    "difference_statistic",
    "tangent_component",
    "true_S2_oracle",
    "s2_closed_form",
]


@dataclass(frozen=True)
class InferenceTarget:
    """Contrast matrix ``T`` defining the linear form ``<M, T>``."""

    T: np.ndarray
    label: str = "T"

    def __post_init__(self):
        if not np.linalg.norm(self.T) > 0:
            raise ValueError(f"target {self.label!r} has zero Frobenius norm")

    @classmethod
    def from_entries(cls, d1, d2, entries, label="T"):
        """Build ``T`` from ``(j1, j2, weight)`` triples (0-based indices)."""
        T = np.zeros((d1, d2))
        for j1, j2, w in entries:
            if not (0 <= j1 < d1 and 0 <= j2 < d2):
                raise ValueError(f"entry ({j1}, {j2}) outside a {d1}x{d2} matrix")
            T[int(j1), int(j2)] += float(w)
        return cls(T, label)

    def entries(self):
        rows, cols = np.nonzero(self.T)
        return [(int(j1), int(j2), float(self.T[j1, j2])) for j1, j2 in zip(rows, cols)]


@dataclass
class VarianceAccumulators:
    """Running sums behind the plug-in estimates of ``sigma_i^2`` and ``S_i^2``."""

    sum_sigma2: np.ndarray  # (2,)
    sum_S2: np.ndarray  # (2, n_targets)
    n: int = 0

    @classmethod
    def empty(cls, n_targets):
        return cls(np.zeros(2), np.zeros((2, n_targets)))

    @property
    def sigma2_hat(self):
        return self.sum_sigma2 / self.n if self.n else np.full(2, np.nan)

    @property
    def S2_hat(self):
        return self.sum_S2 / self.n if self.n else np.full_like(self.sum_S2, np.nan)

    def std_hat(self, arm, target_index):
        """``sigma_hat * S_hat`` for one arm and target."""
        return math.sqrt(self.sigma2_hat[arm] * self.S2_hat[arm, target_index])


@dataclass(frozen=True)
class IntervalEstimate:
    """Symmetric normal interval ``point +/- half_width``.

    For single-arm intervals ``half_width = z * sigma_hat * s_hat / sqrt(n)``.
    Difference intervals store the pooled ``sqrt(s0^2 + s1^2)`` in ``sigma_hat``
    and ``s_hat = 1``.
    """

    point: float
    half_width: float
    level: float
    sigma_hat: float
    s_hat: float
    n: int

    @property
    def lower(self):
        return self.point - self.half_width

    @property
    def upper(self):
        return self.point + self.half_width

    @property
    def length(self):
        return 2.0 * self.half_width

    def covers(self, value):
        return self.lower <= value <= self.upper

    def standardized(self, value):
        """``sqrt(n) (point - value) / (sigma_hat s_hat)``."""
        return math.sqrt(self.n) * (self.point - value) / (self.sigma_hat * self.s_hat)


def accumulate_sigma2(acc, y, m_sgd_prev, X, a, pi):
    """Add the played arm's weighted squared residual; ``m_sgd_prev`` holds
    both arms' estimates from before this step."""
    w = inverse_weight(a, pi)
    residual = y - float(np.vdot(m_sgd_prev[a], X))
    acc.sum_sigma2[a] += w * residual * residual
    return acc


def s2_integrand(X, P_U, P_V, T):
    """``<(I - P_U) X P_V + P_U X (I - P_V), T>`` with dense projections."""
    comp_u = np.eye(P_U.shape[0]) - P_U
    comp_v = np.eye(P_V.shape[0]) - P_V
    return float(np.vdot(comp_u @ X @ P_V + P_U @ X @ comp_v, T))


def _s2_weight(a, pi):
    return 1.0 / (pi * pi) if a == 1 else 1.0 / ((1.0 - pi) ** 2)


def accumulate_S2(acc, X, P_U, P_V, a, pi, targets):
    """Dense-projection version of the ``S_i^2`` update for the played arm."""
    inverse_weight(a, pi)
    wt = _s2_weight(a, pi)
    for k, target in enumerate(targets):
        acc.sum_S2[a, k] += s2_integrand(X, P_U, P_V, target.T) ** 2 * wt
    return acc


def accumulate_S2_lowrank(acc, X, basis_u, basis_v, a, pi, targets):
    """Same update as :func:`accumulate_S2` given orthonormal bases ``B_U, B_V``
    of the projections; costs ``O(d^2 r)`` per target.

    Uses ``<P_U^c X P_V + P_U X P_V^c, T> = <X B_V, T B_V> + <B_U'X, B_U'T>
    - 2 <B_U'X B_V, B_U'T B_V>``.
    """
    inverse_weight(a, pi)
    wt = _s2_weight(a, pi)
    XB = X @ basis_v
    BX = basis_u.T @ X
    BXB = BX @ basis_v
    for k, target in enumerate(targets):
        TB = target.T @ basis_v
        BT = basis_u.T @ target.T
        val = np.vdot(XB, TB) + np.vdot(BX, BT) - 2.0 * np.vdot(BXB, BT @ basis_v)
        acc.sum_S2[a, k] += val * val * wt
    return acc


def project_topr(M, r):
    """Project ``M`` onto its own top-``r`` left and right singular spaces."""
    if r > min(M.shape):
        raise ValueError(f"rank r={r} exceeds min{M.shape}")
    W, s, Zt = np.linalg.svd(M, full_matrices=False)
    return (W[:, :r] * s[:r]) @ Zt[:r]


def _as_matrix(T):
    return T.T if isinstance(T, InferenceTarget) else np.asarray(T, dtype=float)


def point_estimate(M_proj, T):
    """``<M_proj, T>``."""
    return float(np.vdot(M_proj, _as_matrix(T)))


def normal_quantile(p):
    """Standard normal quantile."""
    return NormalDist().inv_cdf(p)


def confidence_interval(m_hat, sigma_hat, s_hat, n, level=0.95):
    """Two-sided interval ``m_hat +/- z_{(1-level)/2} sigma_hat s_hat / sqrt(n)``."""
    if n < 1:
        raise ValueError("an interval needs at least one online step (n >= 1)")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if not (sigma_hat > 0 and s_hat > 0):
        raise ValueError(f"variance estimates must be positive (sigma_hat={sigma_hat}, s_hat={s_hat})")
    z = normal_quantile(0.5 + level / 2)
    return IntervalEstimate(float(m_hat), z * sigma_hat * s_hat / math.sqrt(n), level,
                            float(sigma_hat), float(s_hat), int(n))


def difference_statistic(m_hat_1, m_hat_0, acc, n=None, level=0.95, target_index=0):
    """Interval for ``m_T^(1) - m_T^(0)`` with variance ``(s0^2 + s1^2) / n``,
    where ``s_i = sigma_hat_i S_hat_i`` is read from ``acc``."""
    n = acc.n if n is None else n
    pooled = math.sqrt(acc.std_hat(0, target_index) ** 2 + acc.std_hat(1, target_index) ** 2)
    return confidence_interval(m_hat_1 - m_hat_0, pooled, 1.0, n, level)


def tangent_component(truth, arm, T):
    """``U_perp U_perp' T V V' + U U' T V_perp V_perp'`` for the true factors.

    Its inner product with ``X`` is the numerator of the ``S^2`` integrand.
    """
    U, V = truth.U[arm], truth.V[arm]
    TV = T @ V
    UtT = U.T @ T
    UtTV = UtT @ V
    return TV @ V.T + U @ UtT - 2.0 * (U @ UtTV) @ V.T


def true_S2_oracle(truth, T, arm, epsilon, mc_samples=100_000, rng=None, chunk=2_000):
    """Monte Carlo value of the asymptotic variance constant ``S_arm^2``.

    Draws contexts with i.i.d. N(0, 1) entries and averages
    ``<G, X>^2 / ((1 - eps) 1{<M_arm - M_other, X> > 0} + eps/2)`` where ``G``
    is :func:`tangent_component`.

    Returns
    -------
    (estimate, standard_error)
    """
    rng = np.random.default_rng() if rng is None else rng
    G = tangent_component(truth, arm, _as_matrix(T)).ravel()
    gap = (truth.M[arm] - truth.M[1 - arm]).ravel()
    directions = np.stack([G, gap], axis=1)
    total = total_sq = 0.0
    done = 0
    d = truth.d1 * truth.d2
    while done < mc_samples:
        k = min(chunk, mc_samples - done)
        Xs = rng.standard_normal((k, d))
        proj = Xs @ directions
        prob = np.where(proj[:, 1] > 0, 1.0 - epsilon / 2, epsilon / 2)
        vals = proj[:, 0] ** 2 / prob
        total += vals.sum()
        total_sq += np.dot(vals, vals)
        done += k
    mean = total / mc_samples
    var = max(total_sq / mc_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / mc_samples)


def s2_closed_form(truth, T, arm, epsilon):
    """Exact ``S_arm^2`` for Gaussian contexts.

    ``(<G, X>, <M_arm - M_other, X>)`` is a centered bivariate normal, so the
    squared numerator has the same conditional mean on either side of the
    decision boundary; the integral reduces to
    ``||G||_F^2 (1 / (1 - eps/2) + 1 / (eps/2)) / 2``.
    """
    g2 = float(np.sum(tangent_component(truth, arm, _as_matrix(T)) ** 2))
    if not np.any(truth.M[arm] != truth.M[1 - arm]):
        return g2 / (epsilon / 2)
    return 0.5 * g2 * (1.0 / (1.0 - epsilon / 2) + 2.0 / epsilon)
