"""Low-rank matrix completion by singular value thresholding (SVT).

SVT solves ``min tau*||X||_* + 0.5*||X||_F^2  s.t.  X_ij = M_ij on the observed set``,
which approaches the minimum-nuclear-norm completion as ``tau`` grows.
Iteration::

    X_k     = shrink(Y_{k-1}, tau)
    Y_k     = Y_{k-1} + step * P_obs(M - X_k)

started from the usual kick-start ``Y_0 = k0 * step * P_obs(M)`` so the first
few iterations are not spent below the threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrix_core import MaskedMatrix

__all__ = ["CompletionConfig", "CompletionResult", "complete", "shrink_singular_values"]


@dataclass(frozen=True)
class CompletionConfig:
    """SVT settings. ``tau`` and ``step`` default to ``5*sqrt(n*d)`` and ``1.2 / fraction_observed``."""

    tau: float | None = None
    step: float | None = None
    max_iter: int = 500
    tol: float = 1e-4

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.step is not None and not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")

    def resolve(self, shape, fraction_observed):
        n, d = shape
        tau = 5.0 * math.sqrt(n * d) if self.tau is None else self.tau
        step = 1.2 / fraction_observed if self.step is None else self.step
        return tau, step


@dataclass(frozen=True, eq=False)
class CompletionResult:
    completed: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    rank: int = 0


def shrink_singular_values(m, tau):
    """Proximal map of ``tau * ||.||_*``: soft-threshold the singular values of ``m``."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    return (u[:, :r] * s[:r]) @ vt[:r]


def _shrink_with_rank(y, tau):
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    r = int(np.count_nonzero(s > tau))
    return (u[:, :r] * (s[:r] - tau)) @ vt[:r], r


def complete(masked, cfg=CompletionConfig()):
    """Fill the unobserved entries of ``masked`` with an SVT low-rank estimate.

    Stops once ``||P_obs(X - M)||_F / ||P_obs(M)||_F <= cfg.tol``. Hitting
    ``max_iter`` is not an error; the result then has ``converged=False``.
    """
    if not isinstance(masked, MaskedMatrix):
        raise TypeError("complete expects a MaskedMatrix")
    if masked.n_observed == 0:
        raise ValueError("no observed entries")
    tau, step = cfg.resolve(masked.shape, masked.fraction_observed)
    obs = masked.mask
    m_obs = masked.filled(0.0)
    norm_obs = np.linalg.norm(m_obs)
    if norm_obs == 0.0:
        return CompletionResult(np.zeros(masked.shape), 0, 0.0, True, 0)

    k0 = max(1, math.ceil(tau / (step * np.linalg.norm(m_obs, 2))))
    y = k0 * step * m_obs
    x = np.zeros(masked.shape)
    residual = float("inf")
    rank = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        x, rank = _shrink_with_rank(y, tau)
        diff = np.where(obs, m_obs - x, 0.0)
        residual = float(np.linalg.norm(diff) / norm_obs)
        if residual <= cfg.tol:
            converged = True
            break
        y += step * diff
    return CompletionResult(
        completed=x,
        iterations=it,
        final_residual=residual,
        converged=converged,
        rank=rank,
    )
