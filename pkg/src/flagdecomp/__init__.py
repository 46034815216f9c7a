"""flagdecomp: hierarchy-preserving flag decomposition of dense matrices.

Factor a data matrix D with a nested column hierarchy into D = Q R P^T,
where Q holds Stiefel coordinates for a flag of nested subspaces matching
the hierarchy, R is block upper-triangular, and P permutes columns into
hierarchy blocks. Includes a robust (outlier-resistant) solver, chordal
distances on flag manifolds, MDS/kNN analytics over flag collections,
few-shot classification with flag prototypes, and seeded synthetic
generators for benchmarking.
"""

__version__ = "0.1.0"

from .analysis import (
    DistanceMatrix,
    KnnResult,
    LabeledCollection,
    classical_mds,
    distance_matrix,
    flags_from_matrices,
    knn_classify,
    stratified_split,
)
from .decompose import (
    BlockDiagnostics,
    FlagDecompositionResult,
    SolverConfig,
    flag_bmgs,
    get_basis,
    irls_svd_flag,
    load_decomposition,
    projection_reconstruction,
    reconstruct,
    recovery_objective,
    save_decomposition,
    svd_flag,
)
from .errors import (
    DegenerateBlock,
    FlagDecompError,
    FlagTypeError,
    HierarchyViolation,
    NumericalFailure,
)
from .fewshot import (
    FeatureEpisode,
    FewShotStats,
    FlagPrototype,
    classify_episode,
    euclidean_prototype_distance,
    evaluate_episodes,
    flag_prototype,
    flag_query_distance,
    sample_episodes,
    subspace_prototype_distance,
)
from .flags import (
    FlagType,
    StiefelFlag,
    flag_chordal,
    flag_chordal_projector_form,
    grassmann_chordal,
    grassmann_product_sum,
    random_stiefel_flag,
    stiefel_chordal,
)
from .hierarchy import (
    BlockPartition,
    ColumnHierarchy,
    band_hierarchy,
    build_permutation,
    feature_hierarchy,
    load_hierarchy_json,
    neighborhood_hierarchy,
    save_hierarchy_json,
    validate_hierarchy,
)
from .linalg import (
    SvdResult,
    load_matrix_csv,
    numerical_rank,
    projector_complement,
    save_matrix_csv,
    svd,
)
from .metrics import flag_recovery_distance, format_metric, lrse_db, parse_metric, snr_db
from .synthgen import (
    NoiseSpec,
    PlantedInstance,
    derive_seed,
    gen_cluster_sim,
    gen_noise_instance,
    gen_outlier_instance,
    gen_patch_collection,
    subseed_rng,
)

__all__ = [
    "__version__",
    # errors
    "FlagDecompError",
    "HierarchyViolation",
    "DegenerateBlock",
    "FlagTypeError",
    "NumericalFailure",
    # linalg
    "SvdResult",
    "svd",
    "numerical_rank",
    "projector_complement",
    "load_matrix_csv",
    "save_matrix_csv",
    # hierarchy
    "ColumnHierarchy",
    "BlockPartition",
    "validate_hierarchy",
    "build_permutation",
    "neighborhood_hierarchy",
    "band_hierarchy",
    "feature_hierarchy",
    "load_hierarchy_json",
    "save_hierarchy_json",
    # flags
    "FlagType",
    "StiefelFlag",
    "stiefel_chordal",
    "grassmann_chordal",
    "flag_chordal",
    "flag_chordal_projector_form",
    "grassmann_product_sum",
    "random_stiefel_flag",
    # decompose
    "SolverConfig",
    "BlockDiagnostics",
    "FlagDecompositionResult",
    "get_basis",
    "flag_bmgs",
    "reconstruct",
    "recovery_objective",
    "svd_flag",
    "irls_svd_flag",
    "projection_reconstruction",
    "save_decomposition",
    "load_decomposition",
    # metrics
    "snr_db",
    "lrse_db",
    "flag_recovery_distance",
    "format_metric",
    "parse_metric",
    # analysis
    "LabeledCollection",
    "DistanceMatrix",
    "KnnResult",
    "distance_matrix",
    "flags_from_matrices",
    "classical_mds",
    "knn_classify",
    "stratified_split",
    # fewshot
    "FeatureEpisode",
    "FlagPrototype",
    "FewShotStats",
    "flag_prototype",
    "flag_query_distance",
    "euclidean_prototype_distance",
    "subspace_prototype_distance",
    "classify_episode",
    "evaluate_episodes",
    "sample_episodes",
    # synthgen
    "NoiseSpec",
    "PlantedInstance",
    "gen_noise_instance",
    "gen_outlier_instance",
    "gen_cluster_sim",
    "gen_patch_collection",
    "subseed_rng",
    "derive_seed",
]
