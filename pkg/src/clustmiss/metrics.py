"""Correct classification rate and trial summaries."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["CcrSummary", "align_labels", "ccr", "confusion_matrix", "summarize"]

EXHAUSTIVE_MAX_K = 8


def _labels(x, name):
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if arr.size and (arr.min() < 0 or not np.issubdtype(arr.dtype, np.integer)):
        raise ValueError(f"{name} must hold non-negative integers")
    return arr.astype(np.intp)


def confusion_matrix(predicted, truth, k=None):
    """``k x k`` counts with rows indexed by predicted label, columns by truth."""
    predicted = _labels(predicted, "predicted")
    truth = _labels(truth, "truth")
    if predicted.shape != truth.shape:
        raise ValueError(
            f"length mismatch: {predicted.size} predicted vs {truth.size} true labels"
        )
    if k is None:
        k = int(max(predicted.max(initial=0), truth.max(initial=0))) + 1
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (predicted, truth), 1)
    return cm


def align_labels(predicted, truth, k=None):
    """Best mapping of predicted labels onto true labels.

    Returns ``perm`` with ``perm[p]`` the true label assigned to predicted
    label ``p``. Exhaustive search over permutations for k <= 8, Hungarian
    assignment on the confusion matrix beyond that. Ties go to the
    lexicographically first permutation.
    """
    cm = confusion_matrix(predicted, truth, k)
    k = cm.shape[0]
    if k <= EXHAUSTIVE_MAX_K:
        best, best_perm = -1, None
        rows = np.arange(k)
        for perm in itertools.permutations(range(k)):
            hits = cm[rows, perm].sum()
            if hits > best:
                best, best_perm = hits, perm
        return np.array(best_perm, dtype=np.intp)
    row, col = linear_sum_assignment(-cm)
    perm = np.empty(k, dtype=np.intp)
    perm[row] = col
    return perm


def ccr(predicted, truth, k=None):
    """Fraction of points whose predicted cluster matches the truth after alignment.

    Examples
    --------
    >>> ccr([0, 0, 1, 1, 1], [0, 1, 1, 1, 0])
    0.6
    """
    predicted = _labels(predicted, "predicted")
    truth = _labels(truth, "truth")
    if predicted.size == 0:
        raise ValueError("empty labelings")
    perm = align_labels(predicted, truth, k)
    return float(np.mean(perm[predicted] == truth))


@dataclass(frozen=True)
class CcrSummary:
    mean: float
    sd: float
    min: float
    median: float
    max: float
    n_trials: int

    def as_dict(self):
        return {
            "mean": self.mean,
            "sd": self.sd,
            "min": self.min,
            "median": self.median,
            "max": self.max,
        }


def summarize(rates):
    """Mean, sample s.d. (n - 1 denominator), min, median and max of a list of rates."""
    arr = np.asarray(list(rates), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty list")
    # sort first so the result does not depend on input order
    arr = np.sort(arr)
    sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return CcrSummary(
        mean=float(np.mean(arr)),
        sd=sd,
        min=float(arr[0]),
        median=float(np.median(arr)),
        max=float(arr[-1]),
        n_trials=int(arr.size),
    )
