"""Multi-view graph clustering via constrained joint eigendecompositions.

The package groups the views of a multi-view graph into clusters and, inside
each view cluster, groups the nodes, by fitting a symmetric low-rank model
with selectable sign constraints. It ships the solver, a multiplicative-update
baseline, normalization front ends, synthetic benchmark generators, and an
evaluation pipeline built around adjusted mutual information.
"""

from .evaluation import (
    CLUSTERERS,
    SCHEMES,
    ClusteringResult,
    EvalOptions,
    ami,
    ari,
    assign_views,
    evaluate,
    inner_product_threshold_cluster,
    kmeans,
    match_view_clusters,
    nmi,
    postprocess_embeddings,
)
from .graphs import (
    MultiViewGraph,
    NormalizedTensor,
    directed_normalize,
    load_coo_tensor,
    save_coo_tensor,
    symmetric_normalize,
)
from .linalg import best_psd_approx, pool_top_eigenvalues, sym_eig
from .richcom import RichcomModel, build_partition_matrix, richcom_fit
from .solver import (
    CONSTRAINTS,
    ConstraintMode,
    GenClusModel,
    SolveReport,
    fit,
    init_model,
    objective,
    update_embeddings,
    update_view_weights,
)
from .synth import (
    DENSITY_GRID,
    GeneratorSpec,
    default_benchmark_spec,
    generate,
    scaled_benchmark_spec,
)

__version__ = "0.1.0"

__all__ = [
    "CLUSTERERS",
    "CONSTRAINTS",
    "ClusteringResult",
    "ConstraintMode",
    "DENSITY_GRID",
    "EvalOptions",
    "GenClusModel",
    "GeneratorSpec",
    "MultiViewGraph",
    "NormalizedTensor",
    "RichcomModel",
    "SCHEMES",
    "SolveReport",
    "ami",
    "ari",
    "assign_views",
    "best_psd_approx",
    "build_partition_matrix",
    "default_benchmark_spec",
    "directed_normalize",
    "evaluate",
    "fit",
    "generate",
    "init_model",
    "inner_product_threshold_cluster",
    "kmeans",
    "load_coo_tensor",
    "match_view_clusters",
    "nmi",
    "objective",
    "pool_top_eigenvalues",
    "postprocess_embeddings",
    "richcom_fit",
    "save_coo_tensor",
    "scaled_benchmark_spec",
    "sym_eig",
    "symmetric_normalize",
    "update_embeddings",
    "update_view_weights",
]
