"""Pore extraction, shape descriptors and cluster-based artifact mining for SEM micrographs."""

from .analytics import (
    ClusterModel,
    FeatureMatrix,
    PCAModel,
    correlogram_order,
    drop_feature,
    kde_density,
    kmeans,
    pca,
    pearson_matrix,
    select_k,
    standardize,
)
from .filtering import Label, PoreDataset, PoreRecord, apply_lower_cutoff, join_labels
from .imaging import BinaryMask, Micrograph, load_micrograph, otsu_threshold, segment
from .mining import MiningConfig, MiningReport, crosstab, mine, run_pipeline
from .morphology import (
    Pore,
    PoreFeatures,
    compute_features,
    convex_hull_area,
    extract_pores,
    fit_ellipse,
    pore_area_um2,
    trace_boundary,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ClusterModel",
    "FeatureMatrix",
    "Label",
    "Micrograph",
    "MiningConfig",
    "MiningReport",
    "PCAModel",
    "Pore",
    "PoreDataset",
    "PoreFeatures",
    "PoreRecord",
    "apply_lower_cutoff",
    "compute_features",
    "convex_hull_area",
    "correlogram_order",
    "crosstab",
    "drop_feature",
    "extract_pores",
    "fit_ellipse",
    "join_labels",
    "kde_density",
    "kmeans",
    "load_micrograph",
    "mine",
    "otsu_threshold",
    "pca",
    "pearson_matrix",
    "pore_area_um2",
    "run_pipeline",
    "segment",
    "select_k",
    "standardize",
    "trace_boundary",
]
