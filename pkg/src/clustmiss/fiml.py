"""Full-information maximum likelihood for incomplete Gaussian data.

Every case contributes the log-density of its observed coordinates only::

    log L_i = K_i - 0.5 log|S_i| - 0.5 (x_i - m_i)' S_i^{-1} (x_i - m_i)

with ``m_i``, ``S_i`` the observed sub-vector and sub-block of the mean and
covariance and ``K_i = -(p_i / 2) log(2 pi)`` for ``p_i`` observed values.
The sample log-likelihood is the sum over cases. Nothing here imputes data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .lpa import EmConfig, fit_diag_mixture
from .matrix_core import MaskedMatrix, make_rng

__all__ = [
    "FimlResult",
    "GaussianParams",
    "casewise_loglik",
    "conditional_moments",
    "fiml_fit",
    "fiml_lpa_fit",
    "total_loglik",
]

PD_FLOOR = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GaussianParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        d = mu.shape[0]
        if sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {sigma.shape}")
        if np.max(np.abs(sigma - sigma.T)) > 1e-10:
            raise ValueError("sigma is not symmetric")
        if np.linalg.eigvalsh(sigma)[0] < PD_FLOOR:
            raise ValueError(f"sigma has an eigenvalue below {PD_FLOOR}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))

    @property
    def d(self):
        return self.mu.shape[0]


@dataclass(frozen=True, eq=False)
class FimlResult:
    params: GaussianParams
    loglik: float
    history: tuple
    n_iter: int
    converged: bool


def _chol(block):
    try:
        return cho_factor(block, lower=True)
    except LinAlgError as exc:
        raise ValueError("observed covariance block is singular") from exc


def _group_patterns(mask):
    """Map each distinct row mask to the indices of the rows that share it."""
    patterns, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    return [(patterns[g], np.flatnonzero(inverse == g)) for g in range(len(patterns))]


def _block_loglik(params, x_obs, o):
    """Summed log-likelihood of rows ``x_obs`` observed on coordinates ``o``."""
    p = int(o.sum())
    cf = _chol(params.sigma[np.ix_(o, o)])
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    r = x_obs - params.mu[o]
    quad = np.sum(r * cho_solve(cf, r.T).T, axis=1)
    return float(np.sum(-0.5 * p * LOG_2PI - 0.5 * logdet - 0.5 * quad))


def casewise_loglik(params, values, mask=None):
    """Log-likelihood of one case from its observed coordinates."""
    values = np.asarray(values, dtype=float).reshape(-1)
    o = np.ones(values.shape, bool) if mask is None else np.asarray(mask, bool).reshape(-1)
    if values.shape[0] != params.d or o.shape[0] != params.d:
        raise ValueError(f"case must have {params.d} entries")
    if not o.any():
        raise ValueError("case has no observed coordinates")
    return _block_loglik(params, values[o][None, :], o)


def total_loglik(params, data):
    """Sum of case-wise log-likelihoods over the rows of a :class:`MaskedMatrix`.

    Rows with no observed entry contribute zero.
    """
    if data.shape[1] != params.d:
        raise ValueError(f"data must have {params.d} columns, got {data.shape[1]}")
    total = 0.0
    for o, rows in _group_patterns(data.mask):
        if o.any():
            total += _block_loglik(params, data.values[np.ix_(rows, o)], o)
    return total


def conditional_moments(params, values, mask):
    """Mean and covariance of a case's missing coordinates given its observed ones.

    Returns ``(mean, cov)`` over the coordinates where ``mask`` is False, in
    their original order.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    o = np.asarray(mask, bool).reshape(-1)
    m = ~o
    mu, s = params.mu, params.sigma
    if not o.any():
        return mu.copy(), s.copy()
    cf = _chol(s[np.ix_(o, o)])
    coef = cho_solve(cf, s[np.ix_(o, m)]).T  # S_mo S_oo^{-1}
    mean = mu[m] + coef @ (values[o] - mu[o])
    cov = s[np.ix_(m, m)] - coef @ s[np.ix_(o, m)]
    return mean, cov


def _floor_eigenvalues(sigma, floor=PD_FLOOR):
    sigma = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(sigma)
    if w[0] >= floor:
        return sigma
    w = np.maximum(w, floor)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


def _em_step(params, data, groups, diagonal):
    n, d = data.shape
    t1 = np.zeros(d)
    t2 = np.zeros((d, d))
    mu, s = params.mu, params.sigma
    for o, rows in groups:
        m = ~o
        xo = data.values[np.ix_(rows, o)]
        full = np.empty((rows.size, d))
        full[:, o] = xo
        if not o.any():
            full[:] = mu
            t2 += rows.size * s
        elif m.any():
            cf = _chol(s[np.ix_(o, o)])
            coef = cho_solve(cf, s[np.ix_(o, m)]).T
            full[:, m] = mu[m] + (xo - mu[o]) @ coef.T
            cond = s[np.ix_(m, m)] - coef @ s[np.ix_(o, m)]
            t2[np.ix_(m, m)] += rows.size * cond
        t1 += full.sum(axis=0)
        t2 += full.T @ full
    mu_new = t1 / n
    sigma_new = t2 / n - np.outer(mu_new, mu_new)
    if diagonal:
        sigma_new = np.diag(np.maximum(np.diag(sigma_new), PD_FLOOR))
    else:
        sigma_new = _floor_eigenvalues(sigma_new)
    return GaussianParams(mu_new, sigma_new)


def fiml_fit(data, cfg=EmConfig(), diagonal=False):
    """Maximum-likelihood mean and covariance from incomplete data via EM.

    The E-step takes conditional first and second moments of each case's
    missing coordinates given its observed ones; the M-step is the
    complete-data MLE on those moments. With ``diagonal=True`` the covariance
    is constrained to be diagonal. Running out of iterations is reported by
    ``converged=False``.
    """
    if not isinstance(data, MaskedMatrix):
        data = MaskedMatrix.complete(data)
    counts = data.mask.sum(axis=0)
    if np.any(counts < 2):
        raise ValueError(
            f"columns {np.flatnonzero(counts < 2).tolist()} have fewer than 2 observations"
        )
    groups = _group_patterns(data.mask)
    mu0 = data.column_means()
    var0 = np.maximum(np.nanvar(data.values, axis=0), PD_FLOOR)
    params = GaussianParams(mu0, np.diag(var0))

    ll = total_loglik(params, data)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        params = _em_step(params, data, groups, diagonal)
        ll_new = total_loglik(params, data)
        history.append(ll_new)
        if abs(ll_new - ll) <= cfg.loglik_tol * abs(ll):
            converged = True
            break
        ll = ll_new
    return FimlResult(params, history[-1], tuple(history), it, converged)


def fiml_lpa_fit(data, k, cfg=EmConfig(), rng=0):
    """Diagonal Gaussian mixture fit on incomplete data; returns ``(model, labels)``.

    Responsibilities use each case's observed-coordinate marginal density
    under every component, so missing cells never enter the likelihood.
    Labels are the most responsible component per row; a row with nothing
    observed falls back to the mixture weights.
    """
    if not isinstance(data, MaskedMatrix):
        data = MaskedMatrix.from_nan(data)
    x = data.filled(0.0)
    obs = data.mask.astype(float)
    model, resp = fit_diag_mixture(x, obs, k, cfg, make_rng(rng))
    labels = np.argmax(resp, axis=1).astype(np.intp)
    return model, labels
