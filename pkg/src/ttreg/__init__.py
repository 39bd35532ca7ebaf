"""Tensor-train regression and autoregression for tensor-valued data.

Tensors are float64 numpy arrays whose linear layout is first-index-fastest
(Fortran order), so sequential matricization is a plain reshape. Modes and
times are 0-based in code; formulas in the docs use 1-based indices.
"""

__version__ = "0.1.0"

from .autoregression import (
    ARModel,
    NonStationaryError,
    ar_problem,
    check_stationarity,
    fit_ar,
    forecast,
    rearrange_coeff,
    rolling_errors,
    rolling_forecast_errors,
    spectral_radius,
    stack_lags,
)
from .decomp import (
    RankError,
    TTDecomposition,
    hosvd,
    hosvd_project,
    random_tt,
    reconstruct,
    seq_ranks,
    tt_project,
    tt_svd_anchored,
)
from .regression import (
    DivergenceError,
    FitConfig,
    RegressionModel,
    RegressionProblem,
    fit,
    fit_tucker,
    gradient,
    loss,
)
from .selection import BICConfig, bic, param_count, select_joint, select_separate
from .tensor import (
    ShapeError,
    frobenius_norm,
    generalized_inner,
    mode_matricize,
    mode_multiply,
    outer_product,
    reverse_modes,
    seq_matricize,
    seq_unmatricize,
)
