"""Goodness-of-fit test for linear regression on ordered data.

Rows are sorted by an ordering variable, a linear model is fitted by least
squares, and the partial sums of the residuals are turned into a
self-centered, self-normalized piecewise-linear process: the empirical
bridge.  Sampling the bridge on an equispaced grid and whitening with the
estimated limit covariance yields a chi-square test of the model.
"""

from ._kernels import backend_name
from .bridge import (
    BridgeProcess,
    CovarianceModel,
    covariance_model,
    empirical_bridge,
    g_hat,
    k0_hat,
    lorentz_at,
    lorentz_curve,
    partial_sums,
    write_bridge_tsv,
)
from .chisq import (
    TestResult,
    chi2_cdf,
    covariance_matrix,
    grid_vector,
    prepared_design,
    run_test,
    statistic,
    test_grid,
)
from .linalg import cholesky, quadratic_form_inv, solve_spd
from .model import Dataset, RegressionFit, add_intercept, fit_lse, order_by_key
from .simulate import (
    ModelSpec,
    TheoreticalKernel,
    derive_seed,
    empirical_bridge_covariance,
    generate_dataset,
    monte_carlo_level,
    monte_carlo_power,
    normal_quantile,
    sample_limit_vector,
    sample_limit_vectors,
    theoretical_kernel,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "BridgeProcess",
    "CovarianceModel",
    "Dataset",
    "ModelSpec",
    "RegressionFit",
    "TestResult",
    "TheoreticalKernel",
    "add_intercept",
    "backend_name",
    "chi2_cdf",
    "cholesky",
    "covariance_matrix",
    "covariance_model",
    "derive_seed",
    "empirical_bridge",
    "empirical_bridge_covariance",
    "errors",
    "fit_lse",
    "g_hat",
    "generate_dataset",
    "grid_vector",
    "k0_hat",
    "lorentz_at",
    "lorentz_curve",
    "monte_carlo_level",
    "monte_carlo_power",
    "normal_quantile",
    "order_by_key",
    "partial_sums",
    "prepared_design",
    "quadratic_form_inv",
    "run_test",
    "sample_limit_vector",
    "sample_limit_vectors",
    "solve_spd",
    "statistic",
    "test_grid",
    "theoretical_kernel",
    "write_bridge_tsv",
]
