"""Bounded solutions through Green's operators and averaging on the half line."""

from .errors import *  # noqa: F401,F403
from .function_space import (
    AverageProfile,
    BebutovDistance,
    GridFunction,
    almost_periods,
    bebutov,
    bebutov_distance,
    max_deviation,
    read_csv,
    time_average,
    translate,
    write_csv,
)
from .spectral import (
    HyperbolicSplitting,
    OperatorSpec,
    estimate_dichotomy,
    green_eval,
    green_norms,
    split,
)
from .green_solver import (
    LipschitzField,
    SemilinearSolution,
    SolveConfig,
    green_apply_axis,
    green_apply_semiaxis,
    ode_residual,
    solve_semilinear,
)
from .averaging import (
    AveragingProblem,
    AveragingReport,
    BoundTerms,
    averaging_sweep,
    bound_terms,
    empirical_t_sup,
    rescale_forcing,
    solve_rescaled,
    stationary_solution,
)

__version__ = "0.1.0"
