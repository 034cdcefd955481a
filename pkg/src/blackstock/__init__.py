"""Spectral simulation and decay analysis for the Blackstock-Crighton equations

    (a Lap - d/dt)(u_tt - b Lap u_t - c^2 Lap u) = (k u_t^2 + s |grad u|^2)_tt

on intervals and rectangles with Dirichlet or Neumann boundary conditions.
"""

__version__ = "0.1.0"

from .blockop import (
    DecayConstant,
    ModeBlock,
    PdeParams,
    SpectralAbscissa,
    mode_eigenvalues,
    mode_matrix,
    mode_propagator,
    omega0,
    operator_eigenvalues,
    spectral_abscissa,
    zero_mode_block,
)
from .compat import (
    CompatReport,
    derived_boundary,
    derived_initial,
    dirichlet_compat,
    heat_higher_compat,
    neumann_compat,
    neumann_mean_compat,
)
from .decay import DecayFit, NormSeries, compare_omega0, fit_decay, sobolev_norm
from .domain import GridFunction, SpectralDomain, dealiased_product
from .errors import (
    BlackstockError,
    BoundaryConditionError,
    ChannelUnderflowError,
    ConfigError,
    DivergenceError,
    DomainError,
    GuardViolationError,
    IllConditionedError,
    NumericalError,
    ValidationError,
)
from .extension import Extension, extend, vandermonde_coeffs
from .linear import (
    FieldSeries,
    FieldState,
    ProblemData,
    neumann_mean_ode,
    solve_bc_linear,
    solve_direct,
    solve_heat,
    solve_westervelt_linear,
    uniform_times,
)
from .nonlinear import SimConfig, picard_solve, rhs_expanded, simulate, step
from .scenario import Scenario

__all__ = [
    "BlackstockError",
    "BoundaryConditionError",
    "ChannelUnderflowError",
    "CompatReport",
    "ConfigError",
    "DecayConstant",
    "DecayFit",
    "DivergenceError",
    "DomainError",
    "Extension",
    "FieldSeries",
    "FieldState",
    "GridFunction",
    "GuardViolationError",
    "IllConditionedError",
    "ModeBlock",
    "NormSeries",
    "NumericalError",
    "PdeParams",
    "ProblemData",
    "Scenario",
    "SimConfig",
    "SpectralAbscissa",
    "SpectralDomain",
    "ValidationError",
    "compare_omega0",
    "dealiased_product",
    "derived_boundary",
    "derived_initial",
    "dirichlet_compat",
    "extend",
    "fit_decay",
    "heat_higher_compat",
    "mode_eigenvalues",
    "mode_matrix",
    "mode_propagator",
    "neumann_compat",
    "neumann_mean_compat",
    "neumann_mean_ode",
    "omega0",
    "operator_eigenvalues",
    "picard_solve",
    "rhs_expanded",
    "simulate",
    "sobolev_norm",
    "solve_bc_linear",
    "solve_direct",
    "solve_heat",
    "solve_westervelt_linear",
    "spectral_abscissa",
    "step",
    "uniform_times",
    "vandermonde_coeffs",
    "zero_mode_block",
]
