"""Fixed-effects panel estimation with moving block bootstrap inference.

The package covers the full workflow: balanced-panel within-group least
squares, block resampling of adjacent cross-sections (shared start points
across units), reverse-percentile and studentized confidence intervals,
median-based bias correction, three long-run variance estimators behind one
sandwich, simulation designs with their analytic limit theory, and a
reproducible Monte Carlo harness that tabulates the bootstrap distribution
against the limit law.
"""

from .dgp import (
    Ar1Design,
    CrossMoments,
    LimitLaw,
    ar1_limit_law,
    cross_moments,
    simulate_ar1,
    simulate_linear,
    theoretical_bias_b,
)
from .errors import (
    DimensionMismatch,
    DuplicateCell,
    EmptyRun,
    ExcessiveSingularRedraws,
    IndivisibleBlockLength,
    InputError,
    InsufficientReps,
    MalformedCsv,
    MissingStudentization,
    NegativeVariance,
    NonFiniteValue,
    NonStationary,
    NumericalError,
    PanelMbbError,
    SingularDesign,
    TooFewPeriods,
    UnbalancedPanel,
    UnknownFormat,
    UnknownSpec,
    ZeroVariance,
)
from .inference import (
    HypothesisTest,
    InferenceReport,
    bias_corrected_estimate,
    bootstrap_quantile,
    contrast_deltas,
    inference_report,
    linear_hypothesis_test,
    normal_approx_ci,
    reverse_percentile_ci,
    studentized_ci,
)
from .mbb import (
    BlockPlan,
    BootstrapRun,
    bootstrap_distribution,
    draw_block_plan,
    resample_panel,
    valid_block_lengths,
)
from .montecarlo import (
    DEFAULT_ALPHA_GRID,
    ExperimentSpec,
    QuantileRow,
    QuantileTable,
    RowSummary,
    emit_table,
    mc_standard_error,
    merge_tables,
    parse_table_csv,
    run_experiment,
)
from .normal import norm_ppf
from .panel import (
    Contrast,
    PanelData,
    WithinFit,
    contrast_value,
    recover_fixed_effects,
    validate_panel,
    within_group_estimate,
    within_transform,
)
from .rng import Stream, derive_seed
from .variance import (
    VarianceEstimates,
    contrast_variance,
    omega_plug_in_hac,
    omega_star_closed_form,
    omega_star_resampled,
    psd_clamp,
    sigma_hat,
    upsilon,
    variance_estimates,
)

__version__ = "0.1.0"

__all__ = [
    "Ar1Design",
    "BlockPlan",
    "BootstrapRun",
    "Contrast",
    "CrossMoments",
    "DEFAULT_ALPHA_GRID",
    "DimensionMismatch",
    "DuplicateCell",
    "EmptyRun",
    "ExcessiveSingularRedraws",
    "ExperimentSpec",
    "HypothesisTest",
    "IndivisibleBlockLength",
    "InferenceReport",
    "InputError",
    "InsufficientReps",
    "LimitLaw",
    "MalformedCsv",
    "MissingStudentization",
    "NegativeVariance",
    "NonFiniteValue",
    "NonStationary",
    "NumericalError",
    "PanelData",
    "PanelMbbError",
    "QuantileRow",
    "QuantileTable",
    "RowSummary",
    "SingularDesign",
    "Stream",
    "TooFewPeriods",
    "UnbalancedPanel",
    "UnknownFormat",
    "UnknownSpec",
    "VarianceEstimates",
    "WithinFit",
    "ZeroVariance",
    "ar1_limit_law",
    "bias_corrected_estimate",
    "bootstrap_distribution",
    "bootstrap_quantile",
    "contrast_deltas",
    "contrast_value",
    "contrast_variance",
    "cross_moments",
    "derive_seed",
    "draw_block_plan",
    "emit_table",
    "inference_report",
    "linear_hypothesis_test",
    "mc_standard_error",
    "merge_tables",
    "norm_ppf",
    "normal_approx_ci",
    "omega_plug_in_hac",
    "omega_star_closed_form",
    "omega_star_resampled",
    "parse_table_csv",
    "psd_clamp",
    "recover_fixed_effects",
    "resample_panel",
    "reverse_percentile_ci",
    "run_experiment",
    "sigma_hat",
    "simulate_ar1",
    "simulate_linear",
    "studentized_ci",
    "theoretical_bias_b",
    "upsilon",
    "valid_block_lengths",
    "validate_panel",
    "variance_estimates",
    "within_group_estimate",
    "within_transform",
]
