"""Synthetic data generators and the consistent-population protocol for real data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lpa import EmConfig, lpa_assign, lpa_fit
from .matrix_core import as_matrix, make_rng
from .metrics import align_labels
from .spectral import SimilarityConfig, SpectralConfig, spectral_cluster

__all__ = [
    "BlockMeanSpec",
    "TwoGaussianSpec",
    "consistent_population",
    "gen_block_mean",
    "gen_two_gaussians",
    "subsample_rows",
]

MAX_RETRIES = 100


@dataclass(frozen=True)
class TwoGaussianSpec:
    """Two unit-variance spherical clusters centred at the origin and at ``(a, ..., a)``.

    Each point joins the offset cluster with probability ``proportion_cluster1``.
    """

    a: float
    n_total: int = 500
    proportion_cluster1: float = 0.5
    dim: int = 2

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"a must be non-negative, got {self.a}")
        if not 0.0 < self.proportion_cluster1 < 1.0:
            raise ValueError("proportion_cluster1 must lie in (0, 1)")
        if self.n_total < 2 or self.dim < 1:
            raise ValueError("n_total must be >= 2 and dim >= 1")


@dataclass(frozen=True)
class BlockMeanSpec:
    """Top half: means step by ``mean_step`` every ``block_width`` columns. Bottom half: N(0, 1)."""

    n: int = 1000
    d: int = 100
    block_width: int = 10
    mean_step: float = 0.1

    def __post_init__(self):
        if self.n < 2 or self.d < 1 or self.block_width < 1:
            raise ValueError("n must be >= 2, d and block_width >= 1")
        if self.d % self.block_width:
            raise ValueError(f"block_width {self.block_width} does not divide d={self.d}")


def gen_two_gaussians(spec, rng):
    """Draw a shuffled two-cluster sample; returns ``(points, labels)``.

    Cluster sizes are binomial. Draws where a cluster comes out empty are
    repeated, up to 100 times.
    """
    rng = make_rng(rng)
    for _ in range(MAX_RETRIES):
        n1 = int(rng.binomial(spec.n_total, spec.proportion_cluster1))
        if 0 < n1 < spec.n_total:
            break
    else:
        raise ValueError("could not draw two non-empty clusters")
    labels = np.zeros(spec.n_total, dtype=np.intp)
    labels[spec.n_total - n1 :] = 1
    points = rng.standard_normal((spec.n_total, spec.dim))
    points[labels == 1] += spec.a
    order = rng.permutation(spec.n_total)
    return points[order], labels[order]


def gen_block_mean(spec, rng):
    """Two-cluster matrix: rows ``[0, n/2)`` carry block means (label 0), the rest are N(0, 1) (label 1)."""
    rng = make_rng(rng)
    top = spec.n // 2
    x = rng.standard_normal((spec.n, spec.d))
    block_means = spec.mean_step * (np.arange(spec.d) // spec.block_width + 1)
    x[:top] += block_means
    labels = np.zeros(spec.n, dtype=np.intp)
    labels[top:] = 1
    return x, labels


def consistent_population(
    data,
    k=2,
    spectral_cfg=SpectralConfig(),
    sim_cfg=SimilarityConfig(),
    em_cfg=EmConfig(),
    rng=0,
):
    """Rows that spectral clustering and LPA place in the same (aligned) cluster.

    Returns ``(indices, labels)``: the agreeing row indices in ascending order
    and the shared label of each, in the spectral labelling.
    """
    data = as_matrix(data, "data")
    sc_rng, lpa_rng = make_rng(rng).spawn(2)
    if k != spectral_cfg.k:
        spectral_cfg = SpectralConfig(
            k=k,
            embedding_dim=spectral_cfg.embedding_dim,
            two_cluster_rule=spectral_cfg.two_cluster_rule,
            kmeans_config=spectral_cfg.kmeans_config,
        )
    sc = spectral_cluster(data, spectral_cfg, sim_cfg, sc_rng)
    lpa = lpa_assign(lpa_fit(data, k, em_cfg, lpa_rng), data)
    perm = align_labels(lpa, sc, k)
    agree = np.flatnonzero(perm[lpa] == sc)
    if agree.size == 0:
        raise ValueError("spectral clustering and LPA agree on no rows")
    return agree, sc[agree]


def subsample_rows(data, labels, n_sample, rng):
    """Uniform sample of ``n_sample`` rows without replacement, labels kept aligned."""
    data = np.asarray(data)
    labels = np.asarray(labels)
    n = data.shape[0]
    if labels.shape[0] != n:
        raise ValueError("data and labels differ in length")
    if not 1 <= n_sample <= n:
        raise ValueError(f"n_sample must lie in [1, {n}], got {n_sample}")
    idx = make_rng(rng).choice(n, size=n_sample, replace=False)
    return data[idx], labels[idx]
