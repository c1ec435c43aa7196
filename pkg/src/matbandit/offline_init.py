"""Offline pure-exploration phase and the nuclear-norm initial estimate."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lowrank_sgd import FactorPair, balanced_factors
from .model import realize_reward, sample_context

__all__ = [
    "OfflineBatch",
    "NuclearNormResult",
    "collect_offline",
    "default_lambda",
    "prox_nuclear",
    "nuclear_norm_estimate",
    "factorize_init",
]


@dataclass
class OfflineBatch:
    """Per-arm contexts (shape ``(n_i, d1, d2)``) and rewards under uniform actions."""

    X: tuple[np.ndarray, np.ndarray]
    y: tuple[np.ndarray, np.ndarray]

    @property
    def counts(self):
        return tuple(len(y) for y in self.y)


@dataclass
class NuclearNormResult:
    M: np.ndarray
    n_iter: int
    converged: bool
    objective: list = field(default_factory=list)


def collect_offline(truth, n0, rng):
    """Play ``n0`` rounds with actions drawn uniformly at random."""
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    xs, ys = ([], []), ([], [])
    for _ in range(n0):
        X = sample_context(truth.d1, truth.d2, rng)
        a = int(rng.random() < 0.5)
        y, _ = realize_reward(truth, X, a, rng)
        xs[a].append(X)
        ys[a].append(y)
    shape = (0, truth.d1, truth.d2)
    return OfflineBatch(
        tuple(np.array(x) if x else np.empty(shape) for x in xs),
        tuple(np.array(y, dtype=float) for y in ys),
    )


def default_lambda(sigma, d1, d2, n):
    """Rate-based penalty ``2 sigma sqrt(max(d1, d2) / n)``."""
    return 2.0 * sigma * math.sqrt(max(d1, d2) / max(n, 1))


def prox_nuclear(Z, tau):
    """Singular value soft-thresholding; returns ``(prox, nuclear norm of prox)``."""
    W, s, Zt = np.linalg.svd(Z, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (W[:, keep] * s[keep]) @ Zt[keep], float(s.sum())


def _lipschitz(A, n, rng, iters=50):
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        est = np.linalg.norm(w)
        if est == 0.0:
            return 0.0
        v = w / est
    return est / n


def nuclear_norm_estimate(X, y, lambda_reg, max_iter=500, tol=1e-6, rng=None, lipschitz_margin=1.01):
    """Proximal gradient for ``(1/2n) sum (y - <M, X>)^2 + lambda ||M||_*``.

    Uses a fixed step ``1/L``, with ``L`` from power iteration on the design
    (inflated by ``lipschitz_margin``). Stops when successive iterates differ
    by less than ``tol`` in Frobenius norm; hitting ``max_iter`` first emits a
    ``RuntimeWarning`` and sets ``converged=False``.

    Parameters
    ----------
    X : ndarray, shape (n, d1, d2)
    y : ndarray, shape (n,)
    lambda_reg : float
    """
    if lambda_reg < 0:
        raise ValueError("lambda_reg must be nonnegative")
    X = np.asarray(X, dtype=float)
    n, d1, d2 = X.shape
    if n == 0:
        return NuclearNormResult(np.zeros((d1, d2)), 0, True)
    rng = np.random.default_rng(0) if rng is None else rng
    A = X.reshape(n, d1 * d2)
    y = np.asarray(y, dtype=float)
    L = _lipschitz(A, n, rng) * lipschitz_margin
    if L == 0.0:
        return NuclearNormResult(np.zeros((d1, d2)), 0, True)
    step = 1.0 / L

    m = np.zeros(d1 * d2)
    resid = -y
    objective = [0.5 * float(resid @ resid) / n]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = A.T @ resid / n
        new, nuc = prox_nuclear((m - step * grad).reshape(d1, d2), step * lambda_reg)
        new = new.ravel()
        change = np.linalg.norm(new - m)
        m = new
        resid = A @ m - y
        objective.append(0.5 * float(resid @ resid) / n + lambda_reg * nuc)
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"nuclear-norm solver stopped at max_iter={max_iter}", RuntimeWarning, stacklevel=2)
    return NuclearNormResult(m.reshape(d1, d2), it, converged, objective)


def factorize_init(m_init, r):
    """Balanced rank-``r`` factors of an initial estimate."""
    return balanced_factors(np.asarray(m_init, dtype=float), r)
