"""Mixtures of common skew-t factor analyzers."""

from .aecm import ComponentCollapseError, DofBoundWarning, FitConfig, FitResult, fit
from .densities import log_density_gh, log_density_skew_t, log_density_t
from .fileio import load_model, read_matrix_csv, save_model
from .gig import GigParams, gig_expectations, gig_moments
from .initialization import InitConfig, hierarchical_labels, initial_params
from .metrics import adjusted_rand_index, bic, contingency_table, select_model
from .model import (
    PARSIMONY_PANELS,
    DataMatrix,
    MixtureParams,
    count_free_parameters,
    mixture_log_density,
    parsimony_table,
    posterior_responsibilities,
)
from .simulate import SimSpec, benchmark_spec, simulate
from .specfun import log_bessel_k

__all__ = [
    "ComponentCollapseError",
    "DofBoundWarning",
    "FitConfig",
    "FitResult",
    "fit",
    "log_density_gh",
    "log_density_skew_t",
    "log_density_t",
    "load_model",
    "read_matrix_csv",
    "save_model",
    "GigParams",
    "gig_expectations",
    "gig_moments",
    "InitConfig",
    "hierarchical_labels",
    "initial_params",
    "adjusted_rand_index",
    "bic",
    "contingency_table",
    "select_model",
    "PARSIMONY_PANELS",
    "DataMatrix",
    "MixtureParams",
    "count_free_parameters",
    "mixture_log_density",
    "parsimony_table",
    "posterior_responsibilities",
    "SimSpec",
    "benchmark_spec",
    "simulate",
    "log_bessel_k",
]

__version__ = "0.1.0"
