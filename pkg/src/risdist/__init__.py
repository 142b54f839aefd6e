"""Distribution fits, performance metrics and Monte Carlo checks for RIS-aided links."""

from .channelmodels import (
    KeyholeModel,
    NccsModel,
    RisDhModel,
    RisTModel,
    SquaredKGModel,
)
from .exceptions import ConvergenceError, FitError
from .metrics import DPSK, MetricCurve, Method, ModulationParams, Scheme, metric_curve
from .momentmatch import MomentSet, SaaFit, fit_saa, sum_moments
from .montecarlo import EmpiricalCurve, SimConfig, simulate
from .special import EvalAccuracy

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DPSK",
    "EmpiricalCurve",
    "EvalAccuracy",
    "FitError",
    "KeyholeModel",
    "MetricCurve",
    "Method",
    "ModulationParams",
    "MomentSet",
    "NccsModel",
    "RisDhModel",
    "RisTModel",
    "SaaFit",
    "Scheme",
    "SimConfig",
    "SquaredKGModel",
    "fit_saa",
    "metric_curve",
    "simulate",
    "sum_moments",
]
