"""Combination and minimum-variance portfolio weights by sup-norm-relaxed
minimum-norm optimization, with the covariance estimators, competitor
methods, tuning schemes, Monte Carlo generators, and backtests around it.
"""

from ._kernels import NUMBA_ENABLED
from .backtest import BacktestReport, mafe, msfe, rolling_portfolio, sharpe_ratio
from .competitors import (
    CompetitorSpec,
    gec_weights,
    lasso_recentered,
    oracle_membership_weights,
    pc_grouping_weights,
    ridge_recentered,
    simple_average,
)
from .covariance import CovEstimate, Panel, forecast_errors, lw_linear_shrinkage, sample_vc
from .exceptions import (
    ContractViolationError,
    DegenerateSharpeError,
    DegenerateVarianceError,
    InsufficientDataError,
    L2RelaxError,
    MissingTargetError,
    NotPSDError,
    NumericalError,
    SingularMatrixError,
    UsageError,
)
from .harness import run_dgp_study, run_ff5_study
from .numerics import RngStream, mvn_sample, psd_sqrt, solve_linear, sym_eigen
from .simulation import (
    DgpSpec,
    Ff5Spec,
    bias_variance_sweep,
    compute_snr,
    dgp_oracle_weights,
    generate_dgp,
    generate_ff5,
    load_ff5_params,
    psi_core,
)
from .solver import (
    GroupStructure,
    WeightSolution,
    classical_weights,
    duality_gap,
    expand_block_equicorrelation,
    oracle_group_weights,
    sa_threshold,
    solve_l2_relaxation,
    weight_path,
)
from .tuning import TuningGrid, TuningResult, cv_kfold, cv_oos, parse_grid, sharpe_validate

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "__version__",
    "BacktestReport", "mafe", "msfe", "rolling_portfolio", "sharpe_ratio",
    "CompetitorSpec", "gec_weights", "lasso_recentered", "oracle_membership_weights",
    "pc_grouping_weights", "ridge_recentered", "simple_average",
    "CovEstimate", "Panel", "forecast_errors", "lw_linear_shrinkage", "sample_vc",
    "ContractViolationError", "DegenerateSharpeError", "DegenerateVarianceError",
    "InsufficientDataError", "L2RelaxError", "MissingTargetError", "NotPSDError",
    "NumericalError", "SingularMatrixError", "UsageError",
    "run_dgp_study", "run_ff5_study",
    "RngStream", "mvn_sample", "psd_sqrt", "solve_linear", "sym_eigen",
    "DgpSpec", "Ff5Spec", "bias_variance_sweep", "compute_snr", "dgp_oracle_weights",
    "generate_dgp", "generate_ff5", "load_ff5_params", "psi_core",
    "GroupStructure", "WeightSolution", "classical_weights", "duality_gap",
    "expand_block_equicorrelation", "oracle_group_weights", "sa_threshold",
    "solve_l2_relaxation", "weight_path",
    "TuningGrid", "TuningResult", "cv_kfold", "cv_oos", "parse_grid", "sharpe_validate",
]
