"""Dither-based extremum seeking: schemes, average systems and property checks."""

from esx.cost import (
    CostModel,
    EnvelopeSpec,
    LocalConstants,
    check_assumption2,
    constant_cost,
    estimate_constants,
    linear_cost,
    paper_cost,
    quadratic_cost,
)
from esx.dynamics import EsParams, PvPlant
from esx.errors import (
    ArgumentDomainError,
    BracketError,
    ConfigError,
    EsxError,
    EvaluationDomainError,
)
from esx.fourier import (
    FourierCoeffs,
    a0_half,
    b1_derivative,
    b1_half,
    delta_star,
    find_equilibrium,
    fourier_coeff,
)
from esx.sim import Trajectory, integrate, tail_metrics, time_to_enter

__version__ = "0.1.0"
