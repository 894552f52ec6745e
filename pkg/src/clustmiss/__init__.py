"""Clustering incomplete data.

Two pipelines are compared: low-rank matrix completion followed by spectral
clustering, and full-information maximum likelihood inside a latent profile
(diagonal Gaussian mixture) model. :mod:`clustmiss.bench` runs the synthetic
benchmarks; ``bench`` is its command line.
"""
from .completion import CompletionConfig, CompletionResult, complete, shrink_singular_values
from .fiml import (
    FimlResult,
    GaussianParams,
    casewise_loglik,
    fiml_fit,
    fiml_lpa_fit,
    total_loglik,
)
from .lpa import EmConfig, LpaModel, lpa_assign, lpa_fit
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
from .metrics import CcrSummary, ccr, summarize
from .simulators import (
    BlockMeanSpec,
    TwoGaussianSpec,
    consistent_population,
    gen_block_mean,
    gen_two_gaussians,
    subsample_rows,
)
from .spectral import (
    KmeansConfig,
    SimilarityConfig,
    SpectralConfig,
    kmeans,
    normalized_laplacian,
    similarity_matrix,
    spectral_cluster,
    spectral_embed,
)

__version__ = "0.1.0"
