"""Synthetic matrix bandit environment: low-rank arm parameters, contexts, rewards."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroundTruth",
    "Observation",
    "generate_ground_truth",
    "random_orthonormal",
    "sample_context",
    "realize_reward",
]


@dataclass(frozen=True)
class GroundTruth:
    """True parameters of both arms, stored in factored form.

    ``U[i] @ diag(lam[i]) @ V[i].T`` is the rank-``r`` parameter of arm ``i``;
    the dense product is cached in ``M[i]``.
    """

    d1: int
    d2: int
    r: int
    U: tuple[np.ndarray, np.ndarray]
    V: tuple[np.ndarray, np.ndarray]
    lam: tuple[np.ndarray, np.ndarray]
    sigma: tuple[float, float]
    M: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        dense = tuple((self.U[i] * self.lam[i]) @ self.V[i].T for i in (0, 1))
        for m in dense:
            m.setflags(write=False)
        object.__setattr__(self, "M", dense)

    def condition_number(self, arm):
        return float(self.lam[arm][0] / self.lam[arm][-1])

    def linear_form(self, arm, T):
        """Return ``<M_arm, T>``."""
        return float(np.vdot(self.M[arm], T))

    def mean_reward(self, arm, X):
        """``<M_arm, X>`` evaluated through the factors."""
        return float(np.sum((self.U[arm].T @ X @ self.V[arm]).diagonal() * self.lam[arm]))


@dataclass(frozen=True)
class Observation:
    t: int
    X: np.ndarray
    pi: float
    a: int
    y: float


def random_orthonormal(d, r, rng):
    """Thin QR of a standard Gaussian ``d x r`` matrix, with ``diag(R) > 0``."""
    q, rmat = np.linalg.qr(rng.standard_normal((d, r)))
    signs = np.sign(np.diag(rmat))
    signs[signs == 0] = 1.0
    return q * signs


def _check_singular_values(values, r, name):
    values = np.asarray(values, dtype=float)
    if values.shape != (r,):
        raise ValueError(f"{name} must have length r={r}, got shape {values.shape}")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be positive and finite")
    if np.any(np.diff(values) > 0):
        raise ValueError(f"{name} must be in descending order")
    return values


def generate_ground_truth(d1, d2, r, singular_values_0, singular_values_1, sigma_0, sigma_1, rng):
    """Draw the two arm parameters from the singular spaces of Gaussian matrices.

    Parameters
    ----------
    d1, d2 : int
        Matrix dimensions.
    r : int
        Common rank, at most ``min(d1, d2)``.
    singular_values_0, singular_values_1 : array_like
        Positive, descending singular values for arm 0 and arm 1.
    sigma_0, sigma_1 : float
        Reward noise standard deviations.
    rng : numpy.random.Generator

    Returns
    -------
    GroundTruth
    """
    if min(d1, d2, r) < 1:
        raise ValueError("dimensions and rank must be positive")
    if r > min(d1, d2):
        raise ValueError(f"rank r={r} exceeds min(d1, d2)={min(d1, d2)}")
    if sigma_0 < 0 or sigma_1 < 0:
        raise ValueError("noise levels must be nonnegative")
    lam = (
        _check_singular_values(singular_values_0, r, "singular_values_0"),
        _check_singular_values(singular_values_1, r, "singular_values_1"),
    )
    U = [random_orthonormal(d1, r, rng) for _ in range(2)]
    V = [random_orthonormal(d2, r, rng) for _ in range(2)]
    # equal parameters happen with probability zero; redraw if they do
    while np.linalg.norm((U[0] * lam[0]) @ V[0].T - (U[1] * lam[1]) @ V[1].T) == 0.0:
        V[0] = random_orthonormal(d2, r, rng)
    for arr in (*U, *V, *lam):
        arr.setflags(write=False)
    return GroundTruth(d1, d2, r, tuple(U), tuple(V), lam, (float(sigma_0), float(sigma_1)))


def sample_context(d1, d2, rng):
    """Context matrix with i.i.d. standard normal entries."""
    return rng.standard_normal((d1, d2))


def realize_reward(truth, X, a, rng):
    """Reward of arm ``a`` at context ``X``; returns ``(y, xi)``.

    The noise is drawn after the action, from ``N(0, sigma_a^2)``.
    """
    if a not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {a!r}")
    xi = truth.sigma[a] * rng.standard_normal()
    return float(np.vdot(truth.M[a], X)) + xi, xi
