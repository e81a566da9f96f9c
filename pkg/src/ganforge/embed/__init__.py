from .export import export_scatter, read_scatter_csv
from .pca import PCAResult, pca
from .tsne import (
    AffinityMatrix,
    Calibration,
    EmbeddingLayout,
    PerplexityWarning,
    conditional_perplexity,
    joint_affinities,
    kl_and_gradient,
    kl_divergence,
    perplexity_calibration,
    tsne,
)

__all__ = [
    "AffinityMatrix",
    "Calibration",
    "EmbeddingLayout",
    "PCAResult",
    "PerplexityWarning",
    "conditional_perplexity",
    "export_scatter",
    "joint_affinities",
    "kl_and_gradient",
    "kl_divergence",
    "pca",
    "perplexity_calibration",
    "read_scatter_csv",
    "tsne",
]
