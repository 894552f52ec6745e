"""Exit criteria for the package, run at full scale.

Each test prints one ``[PASS]``/``[FAIL]`` line, also collected in the
"acceptance criteria" section of the pytest terminal summary. The heavy
experiments go through :func:`clustmiss.bench.run` with the shipped spec
files, so the numbers here are the ones the ``bench`` CLI reports.
"""
import itertools
import math
from pathlib import Path

import numpy as np
import pytest

from clustmiss.bench import load_real_csv, load_spec, report_csv, run
from clustmiss.completion import CompletionConfig, complete, shrink_singular_values
from clustmiss.fiml import fiml_fit
from clustmiss.lpa import EmConfig, lpa_assign, lpa_fit
from clustmiss.matrix_core import MaskedMatrix, make_rng, random_low_rank, remove_entries
from clustmiss.metrics import ccr
from clustmiss.simulators import TwoGaussianSpec, consistent_population, gen_two_gaussians
from clustmiss.spectral import (
    SimilarityConfig,
    SpectralConfig,
    kmeans_fit,
    normalized_laplacian,
    similarity_matrix,
    spectral_cluster,
)

pytestmark = pytest.mark.slow

SPECS = Path(__file__).resolve().parents[1] / "specs"


def summary_means(report, metric="ccr"):
    """{(param, method): mean} from a report's summary rows."""
    key = f"{metric}_mean"
    return {(r.param, r.method): r.value for r in report.summary if r.metric == key}


@pytest.fixture(scope="module")
def table1():
    return run(load_spec(SPECS / "table1_equal_clusters.json"))


@pytest.fixture(scope="module")
def completion_cells():
    return run(load_spec(SPECS / "completion_error.json"))


@pytest.fixture(scope="module")
def missing_pipeline():
    return run(load_spec(SPECS / "missing_pipeline.json"))


@pytest.fixture(scope="module")
def unequal():
    return run(load_spec(SPECS / "unequal_clusters.json"))


def test_criterion_1_table1_ccr(table1, verdict):
    means = summary_means(table1)
    sds = {(r.param, r.method): r.value for r in table1.summary if r.metric == "ccr_sd"}
    # (target, tolerance) or (lower bound, None)
    targets = {
        ("a=1", "sc"): (0.755, 0.03),
        ("a=2", "sc"): (0.918, 0.02),
        ("a=3", "sc"): (0.981, 0.01),
        ("a=5", "sc"): (0.994, None),
        ("a=1", "lpa"): (0.707, 0.05),
        ("a=2", "lpa"): (0.918, 0.02),
        ("a=3", "lpa"): (0.982, 0.01),
        ("a=5", "lpa"): (0.994, None),
    }
    failures, parts = [], []
    for key, (target, tol) in targets.items():
        got = means[key]
        ok = got >= target if tol is None else abs(got - target) <= tol
        parts.append(f"{key[1]}@{key[0]}={got:.4f}")
        if not ok:
            failures.append(key)
    detail = ", ".join(parts) + f" (sc@a=3 sd={sds[('a=3', 'sc')]:.4f}, reference 0.0065)"
    verdict("criterion 1 equal-cluster CCR bands", not failures, detail)
    assert not failures, failures


def test_criterion_2_completion_error(completion_cells, verdict):
    rel = {
        r.param: r.value for r in completion_cells.trials if r.metric == "relative_frobenius"
    }
    conv = {r.param: r.value for r in completion_cells.trials if r.metric == "converged"}
    worst = max(rel.values())
    all_small = all(v <= 1e-3 for v in rel.values())
    rank10 = [rel[f"rank=10,missing={f:g}"] for f in (0.2, 0.4, 0.6, 0.8)]
    trend = all(later * 1.5 >= earlier for earlier, later in zip(rank10, rank10[1:]))
    ok = all_small and trend and len(rel) == 8
    verdict(
        "criterion 2 completion error",
        ok,
        f"max rel. Frobenius {worst:.2e} over 8 cells, rank-10 sequence "
        + " -> ".join(f"{v:.2e}" for v in rank10)
        + f", converged {int(sum(conv.values()))}/8",
    )
    assert all_small, rel
    assert trend, rank10


def test_criterion_3_fig2_ordering(missing_pipeline, verdict):
    means = summary_means(missing_pipeline)
    grid = [f"missing={f:g}" for f in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)]
    slack = 0.005
    broken, parts = [], []
    for p in grid:
        a, b, c = means[(p, "fiml+lpa")], means[(p, "mc+lpa")], means[(p, "mc+sc")]
        parts.append(f"{p.split('=')[1]}: a={a:.3f} b={b:.3f} c={c:.3f}")
        if not (c >= b - slack and b >= a - slack):
            broken.append(p)
    at20 = [means[("missing=0.2", m)] for m in ("fiml+lpa", "mc+lpa", "mc+sc")]
    verdict(
        "criterion 3 soft check (all >= 0.9 at 20% missing)",
        min(at20) >= 0.9,
        ", ".join(f"{v:.3f}" for v in at20),
        gating=False,
    )
    verdict(
        "criterion 3 missing-data ordering mc+sc >= mc+lpa >= fiml+lpa",
        not broken,
        "; ".join(parts) + (f"; violated at {broken}" if broken else ""),
    )
    assert not broken, broken


def test_criterion_4_unequal_trend(unequal, verdict):
    means = summary_means(unequal)
    grid = [f"a={a}" for a in (1, 2, 3, 5)]
    slack = 0.01
    trends = {}
    for m in ("sc", "lpa"):
        seq = [means[(p, m)] for p in grid]
        trends[m] = (seq, all(b >= a - slack for a, b in zip(seq, seq[1:])))
    sc_beats = means[("a=1", "sc")] >= means[("a=1", "lpa")] - slack
    ok = trends["sc"][1] and trends["lpa"][1] and sc_beats
    detail = "; ".join(
        f"{m} " + " -> ".join(f"{v:.3f}" for v in seq) + (" monotone" if good else " NOT monotone")
        for m, (seq, good) in trends.items()
    ) + f"; sc >= lpa at a=1: {sc_beats}"
    verdict("criterion 4 unequal clusters", ok, detail)
    assert trends["sc"][1] and trends["lpa"][1]
    assert sc_beats, (means[("a=1", "sc")], means[("a=1", "lpa")])


def _exhaustive_sse(x):
    best = math.inf
    for bits in itertools.product([0, 1], repeat=x.shape[0] - 1):
        lab = np.array((0,) + bits)
        if lab.any():
            best = min(best, sum(((x[lab == c] - x[lab == c].mean(0)) ** 2).sum() for c in (0, 1)))
    return best


def test_criterion_5_property_suite(verdict):
    checks = {}

    vals = []
    for seed in range(10):
        pts = make_rng(seed).standard_normal((40, 3))
        vals.append(np.linalg.eigvalsh(normalized_laplacian(similarity_matrix(pts)).l))
    vals = np.concatenate(vals)
    checks["laplacian eigenvalues in [-1e-8, 2+1e-8]"] = bool(
        vals.min() >= -1e-8 and vals.max() <= 2 + 1e-8
    )

    x, _ = gen_two_gaussians(TwoGaussianSpec(a=1.0), 3)
    em_ok = all(
        np.all(np.diff(lpa_fit(x, 2, EmConfig(restarts=1), s).history) >= -1e-9)
        for s in range(5)
    )
    cov = np.array([[1.0, 0.6, 0.2], [0.6, 1.5, 0.4], [0.2, 0.4, 1.0]])
    z = make_rng(4).multivariate_normal([0, 1, 2], cov, 300)
    fres = fiml_fit(remove_entries(z, 0.35, 5))
    checks["EM / FIML log-likelihood monotone"] = bool(
        em_ok and np.all(np.diff(fres.history) >= -1e-9)
    )

    resid_ok = True
    for seed, frac in [(6, 0.2), (7, 0.5), (8, 0.7)]:
        m = random_low_rank(120, 80, 3, seed)
        mm = remove_entries(m, frac, seed + 100)
        res = complete(mm, CompletionConfig(max_iter=1000))
        actual = np.linalg.norm(np.where(mm.mask, res.completed - m, 0)) / np.linalg.norm(
            mm.filled(0)
        )
        if res.converged and actual > CompletionConfig().tol:
            resid_ok = False
    checks["completion residual <= tol when converged"] = resid_ok

    full = fiml_fit(MaskedMatrix.complete(z))
    checks["complete-data FIML equals MLE (1e-8)"] = bool(
        np.allclose(full.params.mu, z.mean(0), atol=1e-8, rtol=0)
        and np.allclose(full.params.sigma, np.cov(z.T, bias=True), atol=1e-8, rtol=0)
    )

    truth = make_rng(9).integers(0, 3, 50)
    pred = make_rng(10).integers(0, 3, 50)
    checks["ccr permutation invariance and 0.6 hand case"] = bool(
        ccr([0, 0, 1, 1, 1], [0, 1, 1, 1, 0]) == pytest.approx(0.6)
        and all(
            ccr(np.array(p)[pred], truth) == ccr(pred, truth)
            for p in itertools.permutations(range(3))
        )
    )

    km_ok = True
    for seed in range(10):
        pts = make_rng(seed).standard_normal((6, 2))
        if abs(kmeans_fit(pts, 2, rng=seed).inertia - _exhaustive_sse(pts)) > 1e-9:
            km_ok = False
    checks["k-means optimal on 6-point instances"] = km_ok

    checks["shrink operator hand cases"] = bool(
        np.allclose(shrink_singular_values(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]))
        and np.allclose(shrink_singular_values(np.eye(3) * 2, 0.0), np.eye(3) * 2, atol=1e-10)
        and not shrink_singular_values(np.diag([3.0, 1.0]), 4.0).any()
    )

    spec = {"experiment": "missing-pipeline", "trials": 2, "seed": 11,
            "parameters": {"missing_grid": [0.3], "n": 100, "d": 20}}
    checks["bit-reproducible experiment under fixed seed"] = report_csv(run(spec)) == report_csv(
        run(spec, threads=2)
    )

    failed = [name for name, ok in checks.items() if not ok]
    verdict(
        "criterion 5 property suite",
        not failed,
        f"{len(checks) - len(failed)}/{len(checks)} checks" + (f"; failed: {failed}" if failed else ""),
    )
    assert not failed, failed


def test_criterion_6_consistent_population_protocol(tmp_path, verdict):
    x, _ = gen_two_gaussians(TwoGaussianSpec(a=1.5, n_total=400, dim=3), 21)
    path = tmp_path / "survey.csv"
    with path.open("w") as fh:
        fh.write("serial,x1,x2,x3,zip\n")
        for i, row in enumerate(x):
            fh.write(f"{i}," + ",".join(repr(float(v)) for v in row) + ",91711\n")
    data, names = load_real_csv(path, ["serial", "zip"])
    assert names == ["x1", "x2", "x3"]

    idx, labels = consistent_population(data, 2, rng=33)

    # independent recount: rerun both methods on the same streams, try both label maps
    sc_rng, lpa_rng = make_rng(33).spawn(2)
    sc = spectral_cluster(data, SpectralConfig(), SimilarityConfig(), sc_rng)
    lp = lpa_assign(lpa_fit(data, 2, EmConfig(), lpa_rng), data)
    count = max(int(np.sum(sc == lp)), int(np.sum(sc == 1 - lp)))
    ok = idx.size == count and 0 < idx.size < 400 and np.array_equal(labels, sc[idx])
    verdict(
        "criterion 6 consistent-population protocol on synthetic CSV",
        ok,
        f"retained {idx.size}/400 rows, recount oracle {count}",
    )
    assert ok
