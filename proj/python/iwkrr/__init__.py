"""Importance-weighted kernel ridge regression with Nyström subsampling."""

from ._core import (
    EstimatorKind,
    FittedModel,
    InputError,
    NumericalError,
    SamplingMethod,
    approx_leverage_scores,
    effective_dimension,
    exact_leverage_scores,
    fit_krr,
    fit_nystrom_wkrr,
    fit_wkrr,
    gamma_grid,
    gaussian_ratio,
    geometric_grid,
    gram,
    mse,
    rulsif_weights,
    run_config,
    sample_als,
    sample_uniform,
    simulate,
)

__version__ = "0.1.0"
