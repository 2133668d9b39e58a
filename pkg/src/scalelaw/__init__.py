"""Fit, evaluate, extrapolate and design with generalization-error scaling laws."""

from .design import (
    DesignAnswer,
    error_contour,
    invert_prune_for_mstar,
    max_useful_data,
    max_useful_model,
    optimal_compute_pair,
    prune_min_param_envelope,
    prune_min_params,
)
from .errors import DomainError, IllPosedError, InfeasibleError, ParseError, ScaleLawError
from .extrapolation import ExtrapolationReport, extrapolate_dense, extrapolate_prune, extrapolation_sweep
from .fitting import (
    FitConfig,
    FitReport,
    average_replicates,
    cross_validate,
    divergence,
    fit_dense,
    fit_prune_joint,
    fit_prune_single,
)
from .forms import (
    DenseMeasurement,
    DenseParams,
    PruneJointParams,
    PruneMeasurement,
    PruneParams,
    eval_dense_adapted_density,
    eval_dense_core,
    eval_dense_envelope,
    eval_prune_joint,
    eval_prune_lower_transition,
    eval_prune_single,
    eval_prune_single_complex,
    invariant_mstar,
    irreducible_error,
    validate_criteria,
)
from .io import load_dense_csv, load_prune_csv
from .presets import PRESETS, get_preset
from .synthetic import NoiseModel, generate_dense_grid, generate_prune_family, stability_experiment

__version__ = "0.1.0"
