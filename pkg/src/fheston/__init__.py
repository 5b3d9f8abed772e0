"""Monte-Carlo option pricing in a fractional Heston-type model (H > 1/2)."""

from .contracts import (
    TABLE_PAYOFFS,
    CallPayoff,
    ConstantSigma,
    IndicatorPayoff,
    LinearSigma,
    PiecewiseLinearPayoff,
    ShiftedPowerSigma,
    StaircasePayoff,
    antiderivative_F,
    payoff_eval,
    sigma_eval,
    sigma_validate,
)
from .drivers import (
    DriverIncrements,
    GridSpec,
    KernelTable,
    c_H,
    correlated_drivers,
    covariance_RH,
    fgn_cholesky,
    kernel_K,
)
from .engine import (
    EstimateSummary,
    ExperimentSpec,
    convergence_study,
    naive_estimate,
    run_experiment,
    smoothed_estimate,
    summarize,
)
from .exceptions import DomainError, InvalidSigmaError, NumericalError, UsageError
from .model import (
    ModelParams,
    PathResult,
    inverse_euler_step,
    minimal_martingale_density,
    moment_diagnostics,
    parameter_condition,
    simulate_price_terminal,
    simulate_vol_path,
)
from .streams import PathStreams

__version__ = "0.1.0"

__all__ = [
    "CallPayoff",
    "ConstantSigma",
    "DomainError",
    "DriverIncrements",
    "EstimateSummary",
    "ExperimentSpec",
    "GridSpec",
    "IndicatorPayoff",
    "InvalidSigmaError",
    "KernelTable",
    "LinearSigma",
    "ModelParams",
    "NumericalError",
    "TABLE_PAYOFFS",
    "PathResult",
    "PathStreams",
    "PiecewiseLinearPayoff",
    "ShiftedPowerSigma",
    "StaircasePayoff",
    "UsageError",
    "antiderivative_F",
    "c_H",
    "convergence_study",
    "correlated_drivers",
    "covariance_RH",
    "fgn_cholesky",
    "inverse_euler_step",
    "kernel_K",
    "minimal_martingale_density",
    "moment_diagnostics",
    "naive_estimate",
    "parameter_condition",
    "payoff_eval",
    "run_experiment",
    "sigma_eval",
    "sigma_validate",
    "simulate_price_terminal",
    "simulate_vol_path",
    "smoothed_estimate",
    "summarize",
]
