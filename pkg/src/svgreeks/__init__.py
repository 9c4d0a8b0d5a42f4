"""Malliavin-weight Monte Carlo Greeks for one-factor stochastic volatility models."""

__version__ = "0.1.0"

from .engine import PathFunctionals, evaluate
from .errors import (
    ConfigurationError,
    ContractViolation,
    DegenerateDenominatorError,
    EmptySampleError,
    NumericError,
    NumericOverflowError,
    OracleGateFailure,
    ReportIOError,
    SingularVolatilityError,
    SVGreeksError,
    ThirdOrderDisabledError,
    UnsupportedGreekError,
)
from .estimators import (
    GreekEstimate,
    Payoff,
    WeightProcess,
    delta,
    gamma,
    mc_reduce,
    param_tangent,
    price,
    rho,
    vega,
)
from .models import DeterministicCurve, ModelSpec, SmoothFunction1D, preset
from .oracles import OracleReport, bs_closed_form, duality_check, fd_greek, tangent_oracles
from .paths import PathBundle, RngStream, TimeGrid, simulate_path, simulate_paths
from .tangents import TangentBundle, tangent_bundle
