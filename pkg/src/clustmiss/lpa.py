"""Latent profile analysis: Gaussian mixtures with diagonal covariances fit by EM.

The EM core accepts an optional observation mask. Without one it is ordinary
complete-data LPA. With one, each case contributes only its observed
coordinates to the component densities, and the M-step replaces missing
cells by their conditional moments under each component. :mod:`.fiml` builds
its missing-data mixture on top of this.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .matrix_core import as_matrix, make_rng
from .spectral import KmeansConfig, kmeans

__all__ = ["EmConfig", "LpaModel", "lpa_assign", "lpa_fit", "lpa_responsibilities"]

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 500
    loglik_tol: float = 1e-7
    restarts: int = 10
    variance_floor: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be positive")
        if not self.loglik_tol > 0:
            raise ValueError("loglik_tol must be positive")
        if self.variance_floor < 0:
            raise ValueError("variance_floor must be non-negative (0 disables it)")


@dataclass(frozen=True, eq=False)
class LpaModel:
    """Fitted mixture: ``weights`` (k,), ``means`` and ``variances`` (k, d).

    ``history`` is the log-likelihood after every E-step of the winning
    restart, ``loglik`` its last entry.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    loglik: float = float("nan")
    history: tuple = ()
    n_iter: int = 0
    converged: bool = False

    @property
    def k(self):
        return self.weights.shape[0]

    @property
    def d(self):
        return self.means.shape[1]


def _log_dens(x, obs, means, variances):
    """(n, k) log-density of each case's observed coordinates under each component.

    ``x`` must be zero wherever ``obs`` is zero.
    """
    inv = 1.0 / variances
    quad = (x * x) @ inv.T - 2.0 * x @ (means * inv).T + obs @ (means * means * inv).T
    return -0.5 * (obs @ (LOG_2PI + np.log(variances)).T + quad)


def _e_step(x, obs, weights, means, variances):
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    joint = _log_dens(x, obs, means, variances) + log_w
    norm = logsumexp(joint, axis=1, keepdims=True)
    resp = np.exp(joint - norm)
    return float(norm.sum()), resp


def _m_step(x, obs, resp, means, variances, floor):
    n = x.shape[0]
    nk = resp.sum(axis=0)
    weights = nk / n
    live = nk > 1e-12 * n
    safe = np.where(live, nk, 1.0)[:, None]
    miss = 1.0 - obs
    r_obs = resp.T @ obs
    r_miss = resp.T @ miss
    r_x = resp.T @ x
    new_means = (r_x + means * r_miss) / safe
    obs_ss = resp.T @ (x * x) - 2.0 * new_means * r_x + new_means**2 * r_obs
    miss_ss = r_miss * (variances + (means - new_means) ** 2)
    new_vars = (obs_ss + miss_ss) / safe
    new_means = np.where(live[:, None], new_means, means)
    new_vars = np.where(live[:, None], new_vars, variances)
    new_vars = np.maximum(new_vars, floor)
    return weights, new_means, new_vars


def _hard_init(x, labels, k, floor):
    resp = np.zeros((x.shape[0], k))
    resp[np.arange(x.shape[0]), labels] = 1.0
    ones = np.ones_like(x)
    zeros = np.zeros((k, x.shape[1]))
    return _m_step(x, ones, resp, zeros, zeros, floor)


def _run_em(x, obs, init, cfg):
    weights, means, variances = init
    ll, resp = _e_step(x, obs, weights, means, variances)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        weights, means, variances = _m_step(
            x, obs, resp, means, variances, cfg.variance_floor
        )
        ll_new, resp = _e_step(x, obs, weights, means, variances)
        history.append(ll_new)
        if abs(ll_new - ll) <= cfg.loglik_tol * abs(ll):
            converged = True
            break
        ll = ll_new
    model = LpaModel(
        weights=weights,
        means=means,
        variances=variances,
        loglik=history[-1],
        history=tuple(history),
        n_iter=it,
        converged=converged,
    )
    return model, resp


def fit_diag_mixture(x, obs, k, cfg, rng):
    """Shared EM driver. ``x`` is filled (zeros at missing), ``obs`` a 0/1 float mask.

    Each restart seeds EM from a single k-means++/Lloyd run on the
    mean-imputed data, drawn from its own child stream of ``rng``. The restart
    with the highest final log-likelihood wins, earliest on ties.
    """
    n, d = x.shape
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, n={n}], got {k}")
    n_obs = obs.sum(axis=0)
    col_mean = (x * obs).sum(axis=0) / n_obs
    imputed = np.where(obs > 0, x, col_mean)
    if k > 1 and cfg.variance_floor == 0:
        col_var = ((imputed - col_mean) ** 2 * obs).sum(axis=0)
        const = np.flatnonzero(col_var == 0)
        if const.size:
            raise ValueError(
                f"columns {const.tolist()} are constant; enable variance_floor to fit k={k}"
            )
    init_cfg = KmeansConfig(restarts=1)
    best = None
    for stream in make_rng(rng).spawn(cfg.restarts):
        labels = kmeans(imputed, k, init_cfg, stream)
        init = _hard_init(imputed, labels, k, cfg.variance_floor)
        model, resp = _run_em(x, obs, init, cfg)
        if best is None or model.loglik > best[0].loglik:
            best = (model, resp)
    return best


def lpa_fit(data, k, cfg=EmConfig(), rng=0):
    """Fit a k-profile diagonal Gaussian mixture to complete data."""
    x = as_matrix(data, "data")
    model, _ = fit_diag_mixture(x, np.ones_like(x), k, cfg, rng)
    return model


def lpa_responsibilities(model, data, mask=None):
    """Posterior class probabilities, shape (n, k); rows sum to one.

    With ``mask`` only the observed coordinates of each row enter.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ValueError(f"data must have {model.d} columns, got shape {x.shape}")
    obs = np.ones_like(x) if mask is None else np.asarray(mask, dtype=float)
    x = np.where(obs > 0, x, 0.0)
    return _e_step(x, obs, model.weights, model.means, model.variances)[1]


def lpa_assign(model, data, mask=None):
    """Most probable profile per row, lowest index on ties.

    Computed in log space from ``log w_c + log N(x_i; mu_c, diag(var_c))``.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ValueError(f"data must have {model.d} columns, got shape {x.shape}")
    obs = np.ones_like(x) if mask is None else np.asarray(mask, dtype=float)
    x = np.where(obs > 0, x, 0.0)
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    joint = _log_dens(x, obs, model.means, model.variances) + log_w
    return np.argmax(joint, axis=1).astype(np.intp)
