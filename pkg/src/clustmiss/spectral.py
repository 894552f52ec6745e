"""Spectral clustering on the symmetric normalized graph Laplacian.

Pipeline: Gaussian similarity graph -> ``L = D^{-1/2} (D - W) D^{-1/2}`` ->
eigenvectors of the smallest eigenvalues -> labels, either by the sign of the
second eigenvector (two clusters) or by k-means on the embedding rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .matrix_core import as_matrix, make_rng

__all__ = [
    "KmeansConfig",
    "KmeansResult",
    "LaplacianBundle",
    "SimilarityConfig",
    "SpectralConfig",
    "kmeans",
    "kmeans_fit",
    "normalized_laplacian",
    "similarity_matrix",
    "spectral_cluster",
    "spectral_embed",
]

MEDIAN_HEURISTIC = "median-heuristic"


@dataclass(frozen=True)
class SimilarityConfig:
    """Bandwidth of the Gaussian kernel: a positive float or ``"median-heuristic"``."""

    kernel_bandwidth: Union[float, str] = MEDIAN_HEURISTIC

    def __post_init__(self):
        bw = self.kernel_bandwidth
        if isinstance(bw, str):
            if bw != MEDIAN_HEURISTIC:
                raise ValueError(f"unknown bandwidth rule {bw!r}")
        elif not bw > 0:
            raise ValueError(f"kernel_bandwidth must be positive, got {bw}")


@dataclass(frozen=True)
class KmeansConfig:
    max_iter: int = 300
    restarts: int = 10
    tol: float = 1e-9

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1 or not self.tol > 0:
            raise ValueError("max_iter, restarts and tol must be positive")


@dataclass(frozen=True)
class SpectralConfig:
    k: int = 2
    embedding_dim: int | None = None
    two_cluster_rule: Literal["threshold-zero", "kmeans"] = "threshold-zero"
    kmeans_config: KmeansConfig = field(default_factory=KmeansConfig)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.embedding_dim is not None and self.embedding_dim < 1:
            raise ValueError("embedding_dim must be at least 1")
        if self.two_cluster_rule not in ("threshold-zero", "kmeans"):
            raise ValueError(f"unknown two_cluster_rule {self.two_cluster_rule!r}")

    @property
    def dim(self):
        return self.k if self.embedding_dim is None else self.embedding_dim


@dataclass(frozen=True, eq=False)
class LaplacianBundle:
    w: np.ndarray
    d_diag: np.ndarray
    l: np.ndarray  # noqa: E741


def similarity_matrix(points, cfg=SimilarityConfig()):
    """Gaussian affinities ``exp(-|x_i - x_j|^2 / (2 sigma^2))`` with a zero diagonal.

    Under the median heuristic sigma is the median pairwise Euclidean
    distance; identical points make that zero and raise ``ValueError``.
    """
    points = as_matrix(points, "points")
    if points.shape[0] < 2:
        raise ValueError("need at least two points")
    dist = pdist(points)
    if cfg.kernel_bandwidth == MEDIAN_HEURISTIC:
        sigma = float(np.median(dist))
        if sigma == 0.0:
            raise ValueError("median pairwise distance is zero; pass an explicit bandwidth")
    else:
        sigma = float(cfg.kernel_bandwidth)
    w = squareform(np.exp(-(dist**2) / (2.0 * sigma**2)))
    return w


def normalized_laplacian(w):
    """Build ``L = D^{-1/2} (D - W) D^{-1/2}`` from a symmetric weight matrix."""
    w = as_matrix(w, "w")
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError(f"weight matrix must be square, got {w.shape}")
    if np.max(np.abs(w - w.T)) > 1e-10:
        raise ValueError("weight matrix is not symmetric")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if np.any(np.diag(w) != 0):
        raise ValueError("weight matrix must have a zero diagonal")
    deg = w.sum(axis=1)
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise ValueError(f"isolated vertices (zero degree): {isolated[:10].tolist()}")
    s = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - s[:, None] * w * s[None, :]
    lap = 0.5 * (lap + lap.T)
    return LaplacianBundle(w=w, d_diag=deg, l=lap)


def spectral_embed(bundle, dim):
    """Unit eigenvectors of the ``dim`` smallest Laplacian eigenvalues, as columns.

    Columns are ordered by ascending eigenvalue, and each is signed so that
    its largest-magnitude entry is positive (first such entry on ties).
    """
    n = bundle.l.shape[0]
    if not 1 <= dim <= n:
        raise ValueError(f"dim must lie in [1, {n}], got {dim}")
    _, vecs = np.linalg.eigh(bundle.l)
    emb = vecs[:, :dim].copy()
    pivot = np.argmax(np.abs(emb), axis=0)
    signs = np.sign(emb[pivot, np.arange(dim)])
    signs[signs == 0] = 1.0
    return emb * signs


def spectral_cluster(points, cfg=SpectralConfig(), sim=SimilarityConfig(), rng=0):
    """Cluster the rows of ``points`` into ``cfg.k`` groups."""
    points = as_matrix(points, "points")
    if points.shape[0] < cfg.k:
        raise ValueError(f"need at least k={cfg.k} points, got {points.shape[0]}")
    bundle = normalized_laplacian(similarity_matrix(points, sim))
    if cfg.k == 2 and cfg.two_cluster_rule == "threshold-zero":
        fiedler = spectral_embed(bundle, 2)[:, 1]
        return np.where(fiedler >= 0, 0, 1).astype(np.intp)
    emb = spectral_embed(bundle, cfg.dim)
    return kmeans(emb, cfg.k, cfg.kmeans_config, rng)


@dataclass(frozen=True, eq=False)
class KmeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: tuple  # within-cluster SSE after each assignment step


def _sq_dists(x, centers):
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * x @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[c] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[c : c + 1])[:, 0])
    return centers


def _lloyd(x, k, cfg, rng):
    centers = _kmeanspp(x, k, rng)
    history = []
    labels = None
    rows = np.arange(x.shape[0])
    for it in range(1, cfg.max_iter + 1):
        d2 = _sq_dists(x, centers)
        labels = np.argmin(d2, axis=1)
        own = d2[rows, labels]
        history.append(float(own.sum()))
        counts = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # reseed from the point farthest from its center, never emptying a donor
            candidates = np.where(counts[labels] > 1, own, -1.0)
            far = int(np.argmax(candidates))
            counts[labels[far]] -= 1
            labels[far] = c
            counts[c] = 1
            own[far] = 0.0
        new = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift <= cfg.tol:
            break
    inertia = float(((x - centers[labels]) ** 2).sum())
    return KmeansResult(labels.astype(np.intp), centers, inertia, it, tuple(history))


def kmeans_fit(points, k, cfg=KmeansConfig(), rng=0):
    """Lloyd's algorithm with k-means++ seeding and restarts; full result object.

    Each restart draws from its own child stream of ``rng``; the restart with
    the smallest within-cluster sum of squares wins, earliest on ties.
    """
    x = as_matrix(points, "points")
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k must lie in [1, n={x.shape[0]}], got {k}")
    streams = make_rng(rng).spawn(cfg.restarts)
    best = None
    for stream in streams:
        res = _lloyd(x, k, cfg, stream)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def kmeans(points, k, cfg=KmeansConfig(), rng=0):
    """Labels from :func:`kmeans_fit`."""
    return kmeans_fit(points, k, cfg, rng).labels
