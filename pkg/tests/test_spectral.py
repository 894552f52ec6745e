import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustmiss.metrics import ccr
from clustmiss.simulators import TwoGaussianSpec, gen_two_gaussians
from clustmiss.spectral import (
    KmeansConfig,
    SimilarityConfig,
    SpectralConfig,
    kmeans,
    kmeans_fit,
    normalized_laplacian,
    similarity_matrix,
    spectral_cluster,
    spectral_embed,
)


def two_block_graph(sizes=(3, 3)):
    n = sum(sizes)
    w = np.zeros((n, n))
    start = 0
    for s in sizes:
        w[start : start + s, start : start + s] = 1.0
        start += s
    np.fill_diagonal(w, 0.0)
    return w


def random_weights(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.random((n, n))
    w = a + a.T
    np.fill_diagonal(w, 0.0)
    return w


class TestSimilarity:
    def test_identical_rows(self):
        w = similarity_matrix([[1.0, 2.0], [1.0, 2.0]], SimilarityConfig(0.7))
        assert w[0, 1] == 1.0 and w[0, 0] == 0.0

    def test_distance_sigma_sqrt2(self):
        sigma = 0.8
        pts = [[0.0, 0.0], [sigma * math.sqrt(2), 0.0]]
        w = similarity_matrix(pts, SimilarityConfig(sigma))
        assert w[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_median_heuristic(self):
        pts = np.array([[0.0], [1.0], [3.0]])
        # pairwise distances 1, 3, 2 -> median 2
        w = similarity_matrix(pts)
        assert w[0, 1] == pytest.approx(math.exp(-1 / 8))
        assert w[0, 2] == pytest.approx(math.exp(-9 / 8))

    def test_all_identical_rejected(self):
        with pytest.raises(ValueError, match="median"):
            similarity_matrix(np.ones((4, 2)))

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            SimilarityConfig(-1.0)
        with pytest.raises(ValueError):
            SimilarityConfig("silverman")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 10**6))
    def test_range_and_symmetry(self, n, seed):
        pts = np.random.default_rng(seed).standard_normal((n, 3))
        w = similarity_matrix(pts)
        off = w[~np.eye(n, dtype=bool)]
        assert off.max() <= 1.0 and off.min() >= 0.0
        assert np.array_equal(w, w.T) and np.all(np.diag(w) == 0)


class TestLaplacian:
    def test_two_node(self):
        b = normalized_laplacian([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(b.l, [[1, -1], [-1, 1]], atol=1e-15)
        np.testing.assert_allclose(np.linalg.eigvalsh(b.l), [0, 2], atol=1e-12)

    def test_two_components(self):
        vals = np.linalg.eigvalsh(normalized_laplacian(two_block_graph()).l)
        assert np.sum(np.abs(vals) < 1e-10) == 2

    def test_isolated_vertex(self):
        w = two_block_graph((3, 1))
        with pytest.raises(ValueError, match="isolated"):
            normalized_laplacian(w)

    def test_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            normalized_laplacian([[0.0, 1.0], [0.5, 0.0]])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 25), st.integers(0, 10**6))
    def test_invariants(self, n, seed):
        b = normalized_laplacian(random_weights(n, seed))
        vals = np.linalg.eigvalsh(b.l)
        assert vals.min() >= -1e-8 and vals.max() <= 2 + 1e-8
        np.testing.assert_allclose(b.d_diag, b.w.sum(axis=1))
        assert np.max(np.abs(b.l @ np.sqrt(b.d_diag))) < 1e-8


class TestEmbed:
    def test_dim_one_is_sqrt_degree(self):
        b = normalized_laplacian(random_weights(8, 3))
        v = spectral_embed(b, 1)[:, 0]
        ref = np.sqrt(b.d_diag) / np.linalg.norm(np.sqrt(b.d_diag))
        np.testing.assert_allclose(v, ref, atol=1e-8)

    def test_two_blocks(self):
        emb = spectral_embed(normalized_laplacian(two_block_graph()), 2)
        a, b = emb[:3], emb[3:]
        assert np.ptp(a, axis=0).max() < 1e-6 and np.ptp(b, axis=0).max() < 1e-6
        assert np.linalg.norm(a[0] - b[0]) > 0.1

    def test_orthonormal_columns_and_sign(self):
        b = normalized_laplacian(random_weights(12, 9))
        emb = spectral_embed(b, 4)
        np.testing.assert_allclose(emb.T @ emb, np.eye(4), atol=1e-8)
        pivots = emb[np.argmax(np.abs(emb), axis=0), np.arange(4)]
        assert np.all(pivots > 0)

    def test_dim_bounds(self):
        with pytest.raises(ValueError):
            spectral_embed(normalized_laplacian(random_weights(4, 0)), 5)


def exhaustive_min_sse(x):
    n = x.shape[0]
    best = math.inf
    for bits in itertools.product([0, 1], repeat=n - 1):
        lab = np.array((0,) + bits)
        if lab.sum() == 0:
            continue
        sse = sum(((x[lab == c] - x[lab == c].mean(axis=0)) ** 2).sum() for c in (0, 1))
        best = min(best, sse)
    return best


class TestKmeans:
    def test_single_cluster(self):
        labels = kmeans(np.random.default_rng(0).standard_normal((10, 2)), 1)
        assert np.all(labels == labels[0])

    def test_two_pairs(self):
        pts = np.array([[0, 0], [0.1, 0], [10, 10], [10.1, 10]])
        labels = kmeans(pts, 2, rng=1)
        assert labels[0] == labels[1] != labels[2] == labels[3]

    def test_k_exceeds_n(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((2, 2)), 3)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_bipartition(self, seed):
        x = np.random.default_rng(seed).standard_normal((6, 2))
        res = kmeans_fit(x, 2, rng=seed)
        assert res.inertia == pytest.approx(exhaustive_min_sse(x), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_objective_non_increasing(self, seed):
        x = np.random.default_rng(seed).standard_normal((200, 3))
        res = kmeans_fit(x, 5, KmeansConfig(restarts=1), rng=seed)
        assert np.all(np.diff(res.history) <= 1e-9)

    def test_empty_cluster_repair(self):
        # five identical points and one outlier: k=3 forces at least one reseed
        x = np.array([[0.0, 0.0]] * 5 + [[5.0, 5.0]])
        labels = kmeans(x, 3, rng=0)
        assert set(labels.tolist()) == {0, 1, 2}

    def test_deterministic(self):
        x = np.random.default_rng(1).standard_normal((50, 2))
        np.testing.assert_array_equal(kmeans(x, 3, rng=7), kmeans(x, 3, rng=7))


class TestSpectralCluster:
    def test_far_blobs(self):
        x, y = gen_two_gaussians(TwoGaussianSpec(a=5.0), 2024)
        assert ccr(spectral_cluster(x, rng=0), y) >= 0.994

    def test_degenerate_single_blob(self):
        x = np.random.default_rng(0).normal(0, 1e-3, (20, 2))
        labels = spectral_cluster(x, rng=0)
        assert labels.shape == (20,) and set(labels.tolist()) <= {0, 1}

    def test_duplicated_and_permuted_rows(self):
        x, _ = gen_two_gaussians(TwoGaussianSpec(a=3.0, n_total=60), 5)
        x2 = np.vstack([x, x])
        perm = np.random.default_rng(3).permutation(len(x2))
        base = spectral_cluster(x2, rng=0)
        moved = spectral_cluster(x2[perm], rng=0)
        assert ccr(moved, base[perm]) == 1.0
        np.testing.assert_array_equal(base[:60], base[60:])

    @pytest.mark.parametrize("rule", ["threshold-zero", "kmeans"])
    def test_translation_invariance(self, rule):
        x, _ = gen_two_gaussians(TwoGaussianSpec(a=2.0, n_total=80), 8)
        cfg, sim = SpectralConfig(two_cluster_rule=rule), SimilarityConfig(1.5)
        a = spectral_cluster(x, cfg, sim, rng=4)
        b = spectral_cluster(x + np.array([7.0, -3.0]), cfg, sim, rng=4)
        assert ccr(a, b) == 1.0

    def test_threshold_and_kmeans_agree_on_two_blocks(self):
        rng = np.random.default_rng(0)
        x = np.vstack([rng.normal(0, 0.1, (10, 2)), rng.normal(4, 0.1, (10, 2))])
        sim = SimilarityConfig(1.0)
        a = spectral_cluster(x, SpectralConfig(two_cluster_rule="threshold-zero"), sim, rng=0)
        b = spectral_cluster(x, SpectralConfig(two_cluster_rule="kmeans"), sim, rng=0)
        assert ccr(a, b) == 1.0
        assert ccr(a, np.repeat([0, 1], 10)) == 1.0

    def test_three_clusters(self):
        rng = np.random.default_rng(1)
        centers = np.array([[0, 0], [6, 0], [0, 6]])
        x = np.vstack([rng.normal(c, 0.5, (30, 2)) for c in centers])
        truth = np.repeat([0, 1, 2], 30)
        labels = spectral_cluster(x, SpectralConfig(k=3), rng=2)
        assert ccr(labels, truth) == 1.0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            spectral_cluster(np.zeros((2, 2)), SpectralConfig(k=3))
