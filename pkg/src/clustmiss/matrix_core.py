"""Dense matrices with observation masks, error norms and seeded generators.

Plain ``numpy.ndarray`` objects of shape ``(n, d)`` play the role of the data
matrix throughout the package: ``n`` individuals (rows) by ``d`` variables
(columns). A :class:`MaskedMatrix` adds the set of observed entries.

All randomness goes through :func:`make_rng`, which wraps numpy's PCG64 bit
generator. Nothing in the package touches the global numpy random state.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaskedMatrix",
    "as_matrix",
    "derive_seed",
    "frobenius_norm",
    "make_rng",
    "random_low_rank",
    "relative_frobenius",
    "remove_entries",
    "spectral_norm",
]

MAX_MASK_RETRIES = 100


def as_matrix(m, name="matrix"):
    """Return ``m`` as a finite 2-d float array, raising ``ValueError`` otherwise."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def make_rng(seed):
    """PCG64 generator for a non-negative integer seed.

    A ``numpy.random.Generator`` passed in is returned unchanged so that
    callers may hand over an already split stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(base_seed, *keys):
    """Stable 64-bit seed from a base seed and any number of keys.

    Keys are rendered with ``repr`` and hashed with BLAKE2b, so the result is
    identical across processes and platforms (unlike ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(base_seed)).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(repr(key).encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    """A data matrix together with its observation mask.

    ``mask[i, j]`` is True when entry ``(i, j)`` is observed. Unobserved
    positions of ``values`` hold NaN; use :meth:`filled` or index with the
    mask rather than reading them.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool).copy()
        if values.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {values.shape}")
        if mask.shape != values.shape:
            raise ValueError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("observed entries must be finite")
        empty = np.flatnonzero(~mask.any(axis=0))
        if empty.size:
            raise ValueError(f"columns {empty.tolist()} have no observed entries")
        values[~mask] = np.nan
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def complete(cls, m):
        m = as_matrix(m)
        return cls(m, np.ones(m.shape, dtype=bool))

    @classmethod
    def from_nan(cls, m):
        """Build from an array that marks missing entries with NaN."""
        arr = np.asarray(m, dtype=float)
        return cls(arr, ~np.isnan(arr))

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_observed(self):
        return int(self.mask.sum())

    @property
    def fraction_observed(self):
        return self.n_observed / self.mask.size

    def filled(self, fill=0.0):
        """Copy of the values with unobserved entries replaced by ``fill``.

        ``fill`` may be a scalar or anything broadcastable to the matrix,
        e.g. a vector of column means.
        """
        return np.where(self.mask, self.values, fill)

    def column_means(self):
        return np.nanmean(self.values, axis=0)


def frobenius_norm(m):
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(m, dtype=float), "fro"))


def spectral_norm(m):
    """Largest singular value, from a dense SVD."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def relative_frobenius(x, xhat):
    """``||x - xhat||_F / ||x||_F``.

    Raises ``ValueError`` if the shapes differ or ``x`` is the zero matrix.
    """
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    denom = frobenius_norm(x)
    if denom == 0.0:
        raise ValueError("relative error is undefined for a zero reference matrix")
    return frobenius_norm(x - xhat) / denom


def remove_entries(m, fraction, rng):
    """Hide exactly ``round(fraction * n * d)`` entries, uniformly without replacement.

    Masks that would leave a column with no observed entry are redrawn, up to
    100 times, after which ``ValueError`` is raised.
    """
    m = as_matrix(m)
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = make_rng(rng)
    n, d = m.shape
    n_remove = int(round(fraction * n * d))
    for _ in range(MAX_MASK_RETRIES):
        mask = np.ones(n * d, dtype=bool)
        mask[rng.choice(n * d, size=n_remove, replace=False)] = False
        mask = mask.reshape(n, d)
        if mask.any(axis=0).all():
            return MaskedMatrix(m, mask)
    raise ValueError(
        f"could not mask {n_remove} of {n * d} entries without emptying a column "
        f"after {MAX_MASK_RETRIES} attempts"
    )


def random_low_rank(n, d, rank, rng):
    """``A @ B.T`` with ``A`` (n x rank) and ``B`` (d x rank) i.i.d. standard normal."""
    if min(n, d, rank) < 1:
        raise ValueError("n, d and rank must be positive")
    if rank > min(n, d):
        raise ValueError(f"rank {rank} exceeds min(n, d) = {min(n, d)}")
    rng = make_rng(rng)
    a = rng.standard_normal((n, rank))
    b = rng.standard_normal((d, rank))
    return a @ b.T
