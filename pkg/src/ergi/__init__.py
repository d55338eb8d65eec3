"""Exponential realized GARCH-Ito volatility modeling toolkit.

Simulation of the jump-diffusion with exponential-GARCH integrated-variance
dynamics, jump-robust pre-averaging realized volatility, quasi-maximum
likelihood estimation with asymptotic inference, and rolling forecast
backtests against standard benchmark models.
"""

__version__ = "0.1.0"

from .core import (GarchParams, HPath, InitPolicy, RhoCoefficients,
                   StructuralParams, beta_star, floor_rv, h_recursion,
                   long_run_mean, omega_star, quasi_likelihood,
                   rho_coefficients, structural_to_garch)
from .forecast import (DmResult, ForecastSeries, dm_test, fit_har,
                       fit_realized_garch_linear, fit_ugarch, forecast_ergi,
                       mspe, osr, rank_table, rmspe, rolling_backtest)
from .prv import (RvEstimate, TickDay, jump_robust_prv, preaveraged_increment,
                  psi_constant, relative_error)
from .qmle import (FitResult, OptimizerConfig, estimate_A, estimate_V,
                   fit_qmle, z_statistics)
from .simulate import (LogMgfEstimate, NoisyObservations, PathRecord,
                       SimConfig, SimulationError, add_microstructure_noise,
                       estimate_log_mgf_D, simulate_batch, simulate_ergi)

__all__ = [
    "__version__",
    "GarchParams", "HPath", "InitPolicy", "RhoCoefficients", "StructuralParams",
    "beta_star", "floor_rv", "h_recursion", "long_run_mean", "omega_star",
    "quasi_likelihood", "rho_coefficients", "structural_to_garch",
    "DmResult", "ForecastSeries", "dm_test", "fit_har",
    "fit_realized_garch_linear", "fit_ugarch", "forecast_ergi", "mspe", "osr",
    "rank_table", "rmspe", "rolling_backtest",
    "RvEstimate", "TickDay", "jump_robust_prv", "preaveraged_increment",
    "psi_constant", "relative_error",
    "FitResult", "OptimizerConfig", "estimate_A", "estimate_V", "fit_qmle",
    "z_statistics",
    "LogMgfEstimate", "NoisyObservations", "PathRecord", "SimConfig",
    "SimulationError", "add_microstructure_noise", "estimate_log_mgf_D",
    "simulate_batch", "simulate_ergi",
]
