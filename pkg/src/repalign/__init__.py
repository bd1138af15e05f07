"""Representational alignment toolkit.

Three independent lenses on the similarity of two per-stimulus representation
sets: cross-validated ridge encoding scores, unbiased linear CKA, and
Gromov-Wasserstein distances between their dissimilarity structures, plus the
statistics, PCA, voxel selection, and reporting around them.
"""

from .encode import (
    FoldSpec,
    PearsonResult,
    ReliabilitySelection,
    RidgeConfig,
    ScoreReport,
    brain_score,
    fisher_combine,
    make_folds,
    noise_ceiling,
    pearson_r,
    reliability_select,
    ridge_fit,
    ridge_solve,
)
from .errors import ConfigError, DataError, ManifestError, RepalignError
from .reduce import PcaModel, pca_fit, pca_inverse_transform, pca_transform
from .repgeo import (
    Coupling,
    GwResult,
    GwSolverConfig,
    MassVector,
    Rdm,
    build_rdm,
    cka_unbiased,
    gw_distance,
    gw_objective,
    gw_permutation_oracle,
    uniform_masses,
    validate_coupling,
)
from .stats import OlsResult, TestResult, bonferroni, ols_fit, wilcoxon_signed_rank
from .synth import (
    SynthSpec,
    ablate_structure,
    gen_isometric_pair,
    gen_linear_pair,
    gen_subject_responses,
    sigma_for_target_r,
)
from .tensorio import (
    ActivationTensor,
    ColumnStats,
    ResponseMatrix,
    StimulusSet,
    load_array,
    load_matrix,
    save_array,
    save_matrix,
    zscore_apply,
    zscore_fit,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationTensor",
    "ColumnStats",
    "ConfigError",
    "Coupling",
    "DataError",
    "FoldSpec",
    "GwResult",
    "GwSolverConfig",
    "ManifestError",
    "MassVector",
    "OlsResult",
    "PcaModel",
    "PearsonResult",
    "Rdm",
    "ReliabilitySelection",
    "RepalignError",
    "ResponseMatrix",
    "RidgeConfig",
    "ScoreReport",
    "StimulusSet",
    "SynthSpec",
    "TestResult",
    "ablate_structure",
    "bonferroni",
    "brain_score",
    "build_rdm",
    "cka_unbiased",
    "fisher_combine",
    "gen_isometric_pair",
    "gen_linear_pair",
    "gen_subject_responses",
    "gw_distance",
    "gw_objective",
    "gw_permutation_oracle",
    "load_array",
    "load_matrix",
    "make_folds",
    "noise_ceiling",
    "ols_fit",
    "pca_fit",
    "pca_inverse_transform",
    "pca_transform",
    "pearson_r",
    "reliability_select",
    "ridge_fit",
    "ridge_solve",
    "save_array",
    "save_matrix",
    "sigma_for_target_r",
    "uniform_masses",
    "validate_coupling",
    "wilcoxon_signed_rank",
    "zscore_apply",
    "zscore_fit",
]
