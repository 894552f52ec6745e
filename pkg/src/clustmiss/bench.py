"""Experiment runner: declarative specs in, per-trial and summary rows out.

A spec is a JSON object such as::

    {"experiment": "ccr-sweep", "trials": 40, "seed": 1,
     "methods": ["sc", "lpa"], "parameters": {"a_grid": [1, 2, 3, 5]}}

Every trial row records the seed its method ran with. Seeds come from
:func:`~clustmiss.matrix_core.derive_seed` over (base seed, experiment,
parameter point, trial, method), so a report depends only on the spec.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np

from .completion import CompletionConfig, complete
from .fiml import fiml_lpa_fit
from .lpa import EmConfig, lpa_assign, lpa_fit
from .matrix_core import (
    MaskedMatrix,
    derive_seed,
    frobenius_norm,
    make_rng,
    random_low_rank,
    relative_frobenius,
    remove_entries,
    spectral_norm,
)
from .metrics import ccr, summarize
from .simulators import (
    BlockMeanSpec,
    TwoGaussianSpec,
    consistent_population,
    gen_block_mean,
    gen_two_gaussians,
    subsample_rows,
)
from .spectral import KmeansConfig, SimilarityConfig, SpectralConfig, spectral_cluster

__all__ = [
    "ExperimentReport",
    "ExperimentSpec",
    "Row",
    "SpecError",
    "emit",
    "load_spec",
    "parse_csv",
    "parse_json",
    "plot_series",
    "run",
    "validate_spec",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "param", "method", "trial", "seed", "metric", "value")
SUMMARY_TRIAL = "summary"
STATS = ("mean", "sd", "min", "median", "max")
FAILED = "failed"

COMPLETE_DATA_METHODS = ("sc", "lpa")
MISSING_DATA_METHODS = ("fiml+lpa", "mc+lpa", "mc+sc")

EXPERIMENTS = {
    "ccr-sweep": {
        "methods": COMPLETE_DATA_METHODS,
        "defaults": {"a_grid": [1, 2, 3, 5], "n_total": 500, "proportion": 0.5, "dim": 2},
    },
    "ccr-sweep-unequal": {
        "methods": COMPLETE_DATA_METHODS,
        "defaults": {"a_grid": [1, 2, 3, 5], "n_total": 500, "proportion": 0.05, "dim": 2},
    },
    "completion-error": {
        "methods": ("mc",),
        "defaults": {
            "ranks": [2, 10],
            "missing_grid": [0.2, 0.4, 0.6, 0.8],
            "n": 1000,
            "d": 300,
        },
    },
    "missing-pipeline": {
        "methods": MISSING_DATA_METHODS,
        "defaults": {
            "missing_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            "n": 1000,
            "d": 100,
            "block_width": 10,
            "mean_step": 0.1,
        },
    },
    "real-data-protocol": {
        "methods": MISSING_DATA_METHODS,
        "default_methods": ("mc+sc", "fiml+lpa"),
        "defaults": {
            "csv": None,
            "exclude_columns": [],
            "standardize": True,
            "k": 2,
            "n_sample": 1000,
            "missing_grid": [0.1, 0.3, 0.5],
        },
    },
}


class SpecError(ValueError):
    """Invalid experiment spec; ``errors`` lists one ``field: message`` per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class BenchRuntimeError(RuntimeError):
    """Fatal failure during a run; ``partial`` holds the rows gathered so far."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


class Row(NamedTuple):
    experiment: str
    param: str
    method: str
    trial: Union[int, str]
    seed: Optional[int]
    metric: str
    value: float


@dataclass
class ExperimentReport:
    trials: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return _rows_equal(self.trials, other.trials) and _rows_equal(
            self.summary, other.summary
        )


def _rows_equal(a, b):
    if len(a) != len(b):
        return False
    for r, s in zip(a, b):
        if r[:-1] != s[:-1]:
            return False
        if not (r.value == s.value or (math.isnan(r.value) and math.isnan(s.value))):
            return False
    return True


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    trials: int
    seed: int
    methods: tuple
    parameters: dict
    spectral: SpectralConfig
    similarity: SimilarityConfig
    em: EmConfig
    completion: CompletionConfig


# ---------------------------------------------------------------- validation


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_count(v, minimum=1):
    return isinstance(v, int) and not isinstance(v, bool) and v >= minimum


def _check_grid(errors, name, grid, lo, hi, open_lo=False, open_hi=False):
    if not isinstance(grid, list) or not grid:
        errors.append(f"parameters.{name}: must be a non-empty list")
        return
    for i, v in enumerate(grid):
        ok = _is_number(v) and (v > lo if open_lo else v >= lo) and (v < hi if open_hi else v <= hi)
        if not ok:
            errors.append(f"parameters.{name}[{i}]: {v!r} is out of range")


def _build_config(errors, section, raw, cls, fields_):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        errors.append(f"{section}: must be an object")
        return cls()
    unknown = sorted(set(raw) - set(fields_))
    for key in unknown:
        errors.append(f"{section}.{key}: unknown field")
    kwargs = {k: raw[k] for k in fields_ if k in raw}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return cls()


def validate_spec(raw, base_dir=None):
    """Check a decoded JSON spec and build an :class:`ExperimentSpec`.

    Raises :class:`SpecError` listing every problem found. Relative CSV paths
    resolve against ``base_dir``.
    """
    errors = []
    if not isinstance(raw, dict):
        raise SpecError(["<root>: spec must be a JSON object"])
    known = {"experiment", "trials", "seed", "methods", "parameters", "spectral", "em", "completion"}
    for key in sorted(set(raw) - known):
        errors.append(f"{key}: unknown field")

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {sorted(EXPERIMENTS)}, got {experiment!r}")
        raise SpecError(errors)
    info = EXPERIMENTS[experiment]

    trials = raw.get("trials", 40)
    if not _is_count(trials):
        errors.append(f"trials: must be an integer >= 1, got {trials!r}")
    seed = raw.get("seed", 0)
    if not _is_count(seed, 0) or seed >= 2**64:
        errors.append(f"seed: must be a non-negative 64-bit integer, got {seed!r}")

    methods = raw.get("methods", list(info.get("default_methods", info["methods"])))
    if not isinstance(methods, list) or not methods:
        errors.append("methods: must be a non-empty list")
        methods = []
    for m in methods:
        if m not in info["methods"]:
            errors.append(f"methods: {m!r} not available for {experiment}; choose from {list(info['methods'])}")
    if len(set(methods)) != len(methods):
        errors.append("methods: duplicates are not allowed")

    params = dict(info["defaults"])
    given = raw.get("parameters", {})
    if not isinstance(given, dict):
        errors.append("parameters: must be an object")
        given = {}
    for key in sorted(set(given) - set(params)):
        errors.append(f"parameters.{key}: unknown field for {experiment}")
    params.update({k: v for k, v in given.items() if k in params})
    _check_params(errors, experiment, params, base_dir)

    spectral_raw = raw.get("spectral") or {}
    if not isinstance(spectral_raw, dict):
        errors.append("spectral: must be an object")
        spectral_raw = {}
    sim = _build_config(
        errors, "spectral", {k: v for k, v in spectral_raw.items() if k == "kernel_bandwidth"},
        SimilarityConfig, ("kernel_bandwidth",),
    )
    kmeans_cfg = _build_config(
        errors, "spectral.kmeans", spectral_raw.get("kmeans"), KmeansConfig,
        ("max_iter", "restarts", "tol"),
    )
    sc_fields = ("embedding_dim", "two_cluster_rule")
    for key in sorted(set(spectral_raw) - set(sc_fields) - {"kernel_bandwidth", "kmeans"}):
        errors.append(f"spectral.{key}: unknown field")
    sc_kwargs = {k: spectral_raw[k] for k in sc_fields if k in spectral_raw}
    try:
        spectral = SpectralConfig(k=params.get("k", 2), kmeans_config=kmeans_cfg, **sc_kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"spectral: {exc}")
        spectral = SpectralConfig()
    em = _build_config(
        errors, "em", raw.get("em"), EmConfig,
        ("max_iter", "loglik_tol", "restarts", "variance_floor"),
    )
    comp = _build_config(
        errors, "completion", raw.get("completion"), CompletionConfig,
        ("tau", "step", "max_iter", "tol"),
    )
    if errors:
        raise SpecError(errors)
    return ExperimentSpec(
        experiment=experiment,
        trials=trials,
        seed=seed,
        methods=tuple(methods),
        parameters=params,
        spectral=spectral,
        similarity=sim,
        em=em,
        completion=comp,
    )


def _check_params(errors, experiment, p, base_dir):
    if experiment in ("ccr-sweep", "ccr-sweep-unequal"):
        _check_grid(errors, "a_grid", p["a_grid"], 0, math.inf)
        if not _is_count(p["n_total"], 2):
            errors.append("parameters.n_total: must be an integer >= 2")
        if not (_is_number(p["proportion"]) and 0 < p["proportion"] < 1):
            errors.append("parameters.proportion: must lie in (0, 1)")
        if not _is_count(p["dim"]):
            errors.append("parameters.dim: must be an integer >= 1")
    elif experiment == "completion-error":
        _check_grid(errors, "missing_grid", p["missing_grid"], 0, 1, True, True)
        for key in ("n", "d"):
            if not _is_count(p[key]):
                errors.append(f"parameters.{key}: must be an integer >= 1")
        ranks = p["ranks"]
        if not isinstance(ranks, list) or not ranks:
            errors.append("parameters.ranks: must be a non-empty list")
        else:
            bound = min(p["n"], p["d"]) if _is_count(p["n"]) and _is_count(p["d"]) else math.inf
            for i, r in enumerate(ranks):
                if not _is_count(r) or r > bound:
                    errors.append(f"parameters.ranks[{i}]: must be an integer in [1, min(n, d)]")
    elif experiment == "missing-pipeline":
        _check_grid(errors, "missing_grid", p["missing_grid"], 0, 1, True, True)
        for key in ("n", "d", "block_width"):
            if not _is_count(p[key], 2 if key == "n" else 1):
                errors.append(f"parameters.{key}: must be a positive integer")
        if not _is_number(p["mean_step"]):
            errors.append("parameters.mean_step: must be a number")
        if _is_count(p["d"]) and _is_count(p["block_width"]) and p["d"] % p["block_width"]:
            errors.append("parameters.block_width: must divide d")
    elif experiment == "real-data-protocol":
        _check_grid(errors, "missing_grid", p["missing_grid"], 0, 1, True, True)
        if not isinstance(p["csv"], str) or not p["csv"]:
            errors.append("parameters.csv: path to a CSV file is required")
        else:
            path = Path(p["csv"])
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            if not path.is_file():
                errors.append(f"parameters.csv: file not found: {path}")
            p["csv"] = str(path)
        if not isinstance(p["exclude_columns"], list) or not all(
            isinstance(c, str) for c in p["exclude_columns"]
        ):
            errors.append("parameters.exclude_columns: must be a list of column names")
        if not isinstance(p["standardize"], bool):
            errors.append("parameters.standardize: must be true or false")
        if not _is_count(p["k"], 2):
            errors.append("parameters.k: must be an integer >= 2")
        if not _is_count(p["n_sample"], 2):
            errors.append("parameters.n_sample: must be an integer >= 2")


def load_spec(path):
    """Read and validate a JSON spec file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SpecError([f"<file>: cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise SpecError([f"<file>: invalid JSON in {path}: {exc}"]) from exc
    return validate_spec(raw, base_dir=path.parent)


# ---------------------------------------------------------------- real data


def load_real_csv(path, exclude_columns=()):
    """Numeric matrix from a headed CSV; empty fields become NaN.

    Returns ``(matrix, column_names)`` after dropping excluded columns.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        missing = [c for c in exclude_columns if c not in header]
        if missing:
            raise ValueError(f"{path}: excluded columns not in header: {missing}")
        keep = [i for i, name in enumerate(header) if name not in set(exclude_columns)]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(rec[i]) if rec[i].strip() else math.nan for i in keep])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows or not keep:
        raise ValueError(f"{path}: no data")
    return np.array(rows, dtype=float), [header[i] for i in keep]


# ---------------------------------------------------------------- trials


def _fmt(v):
    return f"{v:g}"


def _param_points(spec):
    p = spec.parameters
    if spec.experiment.startswith("ccr-sweep"):
        return [(f"a={_fmt(a)}", {"a": a}) for a in p["a_grid"]]
    if spec.experiment == "completion-error":
        return [
            (f"rank={r},missing={_fmt(f)}", {"rank": r, "missing": f})
            for r in p["ranks"]
            for f in p["missing_grid"]
        ]
    return [(f"missing={_fmt(f)}", {"missing": f}) for f in p["missing_grid"]]


def _cluster_masked(method, masked, k, spec, seed, cache):
    if method == "fiml+lpa":
        return fiml_lpa_fit(masked, k, spec.em, seed)[1]
    if "completed" not in cache:
        cache["completed"] = complete(masked, spec.completion).completed
    xc = cache["completed"]
    if method == "mc+lpa":
        return lpa_assign(lpa_fit(xc, k, spec.em, seed), xc)
    return spectral_cluster(xc, spec.spectral, spec.similarity, seed)


def _run_trial(spec, label, point, trial, context):
    exp = spec.experiment
    data_seed = derive_seed(spec.seed, exp, label, trial)
    rows = []

    def method_seed(method):
        return derive_seed(spec.seed, exp, label, trial, method)

    def record(method, fn):
        seed = method_seed(method)
        try:
            for metric, value in fn(seed):
                rows.append(Row(exp, label, method, trial, seed, metric, float(value)))
        except Exception as exc:  # per-trial failures are data, not fatal
            log.warning("%s %s trial %d %s failed: %s", exp, label, trial, method, exc)
            rows.append(Row(exp, label, method, trial, seed, FAILED, 1.0))

    p = spec.parameters
    if exp.startswith("ccr-sweep"):
        gen = TwoGaussianSpec(point["a"], p["n_total"], p["proportion"], p["dim"])
        x, y = gen_two_gaussians(gen, data_seed)
        for method in spec.methods:
            if method == "sc":
                record(method, lambda s: [("ccr", ccr(spectral_cluster(x, spec.spectral, spec.similarity, s), y))])
            else:
                record(method, lambda s: [("ccr", ccr(lpa_assign(lpa_fit(x, 2, spec.em, s), x), y))])
    elif exp == "completion-error":
        gen_rng, mask_rng = make_rng(data_seed).spawn(2)
        m = random_low_rank(p["n"], p["d"], point["rank"], gen_rng)

        def completion_metrics(_seed):
            res = complete(remove_entries(m, point["missing"], mask_rng), spec.completion)
            err = m - res.completed
            return [
                ("frobenius", frobenius_norm(err)),
                ("relative_frobenius", relative_frobenius(m, res.completed)),
                ("spectral", spectral_norm(err)),
                ("iterations", res.iterations),
                ("converged", int(res.converged)),
            ]

        record("mc", completion_metrics)
    else:
        if exp == "missing-pipeline":
            gen_rng, mask_rng = make_rng(data_seed).spawn(2)
            gen = BlockMeanSpec(p["n"], p["d"], p["block_width"], p["mean_step"])
            x, y = gen_block_mean(gen, gen_rng)
            k = 2
        else:
            sample_rng, mask_rng = make_rng(data_seed).spawn(2)
            pop_x, pop_y = context["population"]
            x, y = subsample_rows(pop_x, pop_y, context["n_sample"], sample_rng)
            k = p["k"]
        masked = remove_entries(x, point["missing"], mask_rng)
        cache = {}
        for method in spec.methods:
            record(method, lambda s, m=method: [("ccr", ccr(_cluster_masked(m, masked, k, spec, s, cache), y, k))])
    return rows


def _prepare_real_data(spec):
    p = spec.parameters
    raw, names = load_real_csv(p["csv"], p["exclude_columns"])
    complete_rows = ~np.isnan(raw).any(axis=1)
    dropped = int((~complete_rows).sum())
    if dropped:
        log.info("dropping %d rows with empty fields before the consistency step", dropped)
    x = raw[complete_rows]
    if x.shape[0] < p["k"]:
        raise ValueError("too few complete rows in the CSV")
    if p["standardize"]:
        sd = x.std(axis=0)
        sd[sd == 0] = 1.0
        x = (x - x.mean(axis=0)) / sd
    seed = derive_seed(spec.seed, spec.experiment, "consistent-population")
    idx, labels = consistent_population(
        x, p["k"], spec.spectral, spec.similarity, spec.em, seed
    )
    n_sample = p["n_sample"]
    if n_sample > idx.size:
        log.warning("n_sample %d exceeds consistent population %d; using %d", n_sample, idx.size, idx.size)
        n_sample = idx.size
    info_rows = [
        Row(spec.experiment, "population", "sc+lpa", 0, seed, "complete_rows", float(x.shape[0])),
        Row(spec.experiment, "population", "sc+lpa", 0, seed, "consistent_rows", float(idx.size)),
        Row(spec.experiment, "population", "sc+lpa", 0, seed, "consistent_fraction", idx.size / x.shape[0]),
    ]
    return {"population": (x[idx], labels), "n_sample": n_sample}, info_rows


def summarize_rows(trial_rows):
    """Summary rows (one per statistic) for every (param, method, metric) cell."""
    groups = {}
    for r in trial_rows:
        if r.metric == FAILED:
            continue
        groups.setdefault((r.experiment, r.param, r.method, r.metric), []).append(r.value)
    out = []
    for (exp, param, method, metric), values in groups.items():
        s = summarize(values)
        for stat in STATS:
            out.append(Row(exp, param, method, SUMMARY_TRIAL, None, f"{metric}_{stat}", getattr(s, stat)))
    return out


def run(spec, threads=1):
    """Execute every (parameter point, trial) of ``spec``; returns an :class:`ExperimentReport`.

    Output order is fixed: parameter points in grid order, then trial, then
    method in spec order, regardless of ``threads``.
    """
    if isinstance(spec, dict):
        spec = validate_spec(spec)
    prefix = []
    context = {}
    try:
        if spec.experiment == "real-data-protocol":
            context, prefix = _prepare_real_data(spec)
    except Exception as exc:
        raise BenchRuntimeError(f"real-data preparation failed: {exc}", ExperimentReport()) from exc

    jobs = [
        (pi, label, point, trial)
        for pi, (label, point) in enumerate(_param_points(spec))
        for trial in range(spec.trials)
    ]
    method_order = {m: i for i, m in enumerate(spec.methods)}
    done = []

    def work(job):
        pi, label, point, trial = job
        return pi, trial, _run_trial(spec, label, point, trial, context)

    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for res in pool.map(work, jobs):
                    done.append(res)
        else:
            for job in jobs:
                done.append(work(job))
    except Exception as exc:
        partial = _assemble(prefix, done, method_order)
        raise BenchRuntimeError(f"run aborted: {exc}", partial) from exc
    return _assemble(prefix, done, method_order)


def _assemble(prefix, done, method_order):
    done = sorted(done, key=lambda t: (t[0], t[1]))
    rows = list(prefix)
    for _, _, trial_rows in done:
        rows.extend(sorted(trial_rows, key=lambda r: method_order.get(r.method, -1)))
    return ExperimentReport(trials=rows, summary=summarize_rows(rows))


# ---------------------------------------------------------------- emit / parse


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in list(report.trials) + list(report.summary):
        writer.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _row_json(r):
    d = r._asdict()
    if isinstance(d["value"], float) and not math.isfinite(d["value"]):
        d["value"] = repr(d["value"])
    return d


def report_json(report):
    doc = {
        "trials": [_row_json(r) for r in report.trials],
        "summary": [_row_json(r) for r in report.summary],
    }
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def plot_series(report):
    """CSV text with columns ``param,method,metric,mean``: the figure-ready means."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("param", "method", "metric", "mean"))
    for r in report.summary:
        if r.metric.endswith("_mean"):
            writer.writerow((r.param, r.method, r.metric[: -len("_mean")], repr(r.value)))
    return buf.getvalue()


def emit(report, fmt, path):
    """Write ``report`` as ``csv`` or ``json`` to ``path``."""
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return path


def _parse_row(d):
    trial = d["trial"]
    trial = SUMMARY_TRIAL if trial == SUMMARY_TRIAL else int(trial)
    seed = d["seed"]
    seed = None if seed in ("", None) else int(seed)
    return Row(d["experiment"], d["param"], d["method"], trial, seed, d["metric"], float(d["value"]))


def parse_csv(text):
    """Inverse of :func:`report_csv`; accepts the CSV text."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected header {reader.fieldnames}")
    report = ExperimentReport()
    for d in reader:
        row = _parse_row(d)
        (report.summary if row.trial == SUMMARY_TRIAL else report.trials).append(row)
    return report


def parse_json(text):
    doc = json.loads(text)
    return ExperimentReport(
        trials=[_parse_row(d) for d in doc["trials"]],
        summary=[_parse_row(d) for d in doc["summary"]],
    )
