"""Factored online SGD for a rank-r matrix parameter.

Each arm keeps a pair ``(U, V)`` with ``U @ V.T`` the current estimate. The
update applies an inverse-propensity weighted gradient whose right factors
rebalance ``U`` and ``V`` using only ``r x r`` decompositions; its product is
the same as renormalizing the iterate through a full SVD first
(:func:`naive_renormalized_update`), which is kept as a reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateFactorError, PropensityError

__all__ = [
    "FactorPair",
    "SvdByproducts",
    "StepSizeSchedule",
    "step_size",
    "theory_t_star",
    "gram_byproducts",
    "sgd_update",
    "naive_renormalized_update",
    "current_estimate",
    "balanced_factors",
    "orthonormal_bases",
    "projections_from_byproducts",
    "inverse_weight",
]

GRAM_FLOOR = 1e-12


@dataclass(frozen=True)
class FactorPair:
    U: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.U.shape[1]

    def product(self):
        return self.U @ self.V.T


@dataclass(frozen=True)
class SvdByproducts:
    """Decompositions ``U'U = R_U diag(D_U) R_U'``, ``V'V = R_V diag(D_V) R_V'`` and
    ``diag(D_U)^1/2 R_U' R_V diag(D_V)^1/2 = Q_U diag(D) Q_V'``."""

    R_U: np.ndarray
    D_U: np.ndarray
    R_V: np.ndarray
    D_V: np.ndarray
    Q_U: np.ndarray
    Q_V: np.ndarray
    D: np.ndarray


@dataclass(frozen=True)
class StepSizeSchedule:
    """``eta_t = c * max(t, t_star) ** -alpha``."""

    c: float = 0.1
    alpha: float = 0.99
    t_star: int = 1

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("step-size constant c must be positive")
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0.5, 1]")
        if self.t_star < 1:
            raise ValueError("t_star must be a positive integer")

    def __call__(self, t):
        return step_size(self, t)


def step_size(schedule, t):
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    return schedule.c * float(max(t, schedule.t_star)) ** (-schedule.alpha)


def theory_t_star(gamma, d, r, alpha):
    """Burn-in ``(gamma^2 d r log^2 d)^(1/alpha)``, rounded up."""
    return max(1, math.ceil((gamma**2 * d * r * math.log(d) ** 2) ** (1.0 / alpha)))


def inverse_weight(arm, pi):
    """``1 / P(a = arm)`` for a Bernoulli(pi) action."""
    if not 0.0 < pi < 1.0:
        raise PropensityError(f"propensity must lie strictly inside (0, 1), got {pi}")
    return 1.0 / pi if arm == 1 else 1.0 / (1.0 - pi)


def _fix_signs(vecs):
    """Signs making the first nonzero entry of each column positive."""
    head = vecs[0]
    if np.all(head != 0.0):
        return np.copysign(1.0, head)
    idx = np.argmax(vecs != 0.0, axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def _sym_eig_desc(gram, what):
    vals, vecs = np.linalg.eigh(gram)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    top = vals[0]
    if not top > 0 or vals[-1] < GRAM_FLOOR * top:
        raise DegenerateFactorError(f"{what} Gram matrix is singular (eigenvalues {vals})")
    return vals, vecs * _fix_signs(vecs)


def gram_byproducts(pair):
    """Decompose the factor Gram matrices of ``pair``."""
    D_U, R_U = _sym_eig_desc(pair.U.T @ pair.U, "U")
    D_V, R_V = _sym_eig_desc(pair.V.T @ pair.V, "V")
    middle = (np.sqrt(D_U)[:, None] * (R_U.T @ R_V)) * np.sqrt(D_V)[None, :]
    Q_U, D, Q_Vt = np.linalg.svd(middle)
    Q_V = Q_Vt.T
    signs = _fix_signs(Q_U)
    return SvdByproducts(R_U, D_U, R_V, D_V, Q_U * signs, Q_V * signs, D)


def _rebalancing_maps(bp):
    left = (bp.R_V / np.sqrt(bp.D_V)) @ bp.Q_V @ (bp.Q_U.T * np.sqrt(bp.D_U)[None, :]) @ bp.R_U.T
    right = (bp.R_U / np.sqrt(bp.D_U)) @ bp.Q_U @ (bp.Q_V.T * np.sqrt(bp.D_V)[None, :]) @ bp.R_V.T
    return left, right


def sgd_update(pairs, X, y, a, pi, eta):
    """One online SGD step; only arm ``a`` moves.

    Parameters
    ----------
    pairs : sequence of two FactorPair
        Factors of arm 0 and arm 1 before the step.
    X : ndarray, shape (d1, d2)
    y : float
        Observed reward of the played arm.
    a : {0, 1}
        Played arm.
    pi : float
        Probability with which arm 1 was played.
    eta : float
        Step size.

    Returns
    -------
    new_pairs : tuple of two FactorPair
        The unplayed arm's pair is returned as the same object.
    byproducts : SvdByproducts
        Decompositions of the played arm's factors before the step.
    """
    if a not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {a!r}")
    w = inverse_weight(a, pi)
    pair = pairs[a]
    bp = gram_byproducts(pair)
    XV = X @ pair.V
    XtU = X.T @ pair.U
    residual = float(np.vdot(pair.U, XV)) - y
    scale = eta * w * residual
    left, right = _rebalancing_maps(bp)
    updated = FactorPair(pair.U - scale * (XV @ left), pair.V - scale * (XtU @ right))
    new_pairs = (updated, pairs[1]) if a == 0 else (pairs[0], updated)
    return new_pairs, bp


def balanced_factors(M, r):
    """Top-``r`` SVD ``W diag(s) Z'`` of ``M`` split as ``(W s^1/2, Z s^1/2)``."""
    if r > min(M.shape):
        raise ValueError(f"rank r={r} exceeds min{M.shape}")
    W, s, Zt = np.linalg.svd(M, full_matrices=False)
    s = s[:r]
    if s[-1] <= GRAM_FLOOR * max(s[0], np.finfo(float).tiny):
        raise DegenerateFactorError(f"matrix has fewer than r={r} nonzero singular values")
    root = np.sqrt(s)
    return FactorPair(W[:, :r] * root, Zt[:r].T * root)


def naive_renormalized_update(pairs, X, y, a, pi, eta):
    """Reference step: rebalance the played arm via a full SVD, then take a plain
    inverse-weighted gradient step. Costs a ``d1 x d2`` SVD per call."""
    if a not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {a!r}")
    w = inverse_weight(a, pi)
    pair = balanced_factors(pairs[a].product(), pairs[a].rank)
    residual = float(np.vdot(pair.U @ pair.V.T, X)) - y
    scale = eta * w * residual
    updated = FactorPair(pair.U - scale * (X @ pair.V), pair.V - scale * (X.T @ pair.U))
    return (updated, pairs[1]) if a == 0 else (pairs[0], updated)


def current_estimate(pair):
    return pair.U @ pair.V.T


def orthonormal_bases(pair, bp):
    """Orthonormal bases of the column spaces of ``U`` and ``V``."""
    return (pair.U @ bp.R_U) / np.sqrt(bp.D_U), (pair.V @ bp.R_V) / np.sqrt(bp.D_V)


def projections_from_byproducts(pair, bp):
    """Orthogonal projections onto ``col(U)`` and ``col(V)``.

    ``P_U = U R_U diag(D_U)^-1 R_U' U'``, which is the projection onto the top-r
    left singular space of ``U V'`` whenever ``V`` has full column rank.
    """
    if np.any(bp.D_U < GRAM_FLOOR * bp.D_U.max()) or np.any(bp.D_V < GRAM_FLOOR * bp.D_V.max()):
        raise DegenerateFactorError("singular factor Gram matrix")
    BU, BV = orthonormal_bases(pair, bp)
    return BU @ BU.T, BV @ BV.T
