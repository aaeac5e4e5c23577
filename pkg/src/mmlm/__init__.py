"""Majorization-minimization Levenberg-Marquardt for constrained least squares."""

from .errors import DimensionError, InfeasiblePointError, NumericalError
from .model import LMModel, majorization_holds, solve_exact_unconstrained, spectral_norm
from .problem import Ball, Box, ConvexSet, NonnegativeOrthant, ResidualProblem, Unconstrained
from .solvers import (
    IterationRecord,
    SolveReport,
    SolverConfig,
    Status,
    hybrid_lm_solve,
    lm_solve,
    pg_baseline_solve,
)
from .stationarity import StationarityReport, certify, decrease_measure, gradient_mapping, prox_step
from .subproblem import (
    Exact,
    FixedIterations,
    InnerResult,
    StationarityTarget,
    accelerated_pg,
    pg_single_step,
    subproblem_stationarity,
)

__version__ = "0.1.0"
