"""Stationary diffusion on star graphs with many edges.

Solve the n-edge stage problems with P1 elements, average the solutions
over coefficient groups, and compare against the upscaled limit problem:
convergence tables, Cauchy-window diagnostics, balance identities, and an
equidistribution check, all reproducible from flat config files via the
``starfem`` command.
"""
from ._rng import PRNG_NAME
from .errors import (ConfigError, EmptyGroupError, InvalidArgumentError,
                     NumericalBreakdownError, StarFemError, UndefinedRateError)
from .stargraph import (GROUP_PROBS, GROUP_VALUES, TWO_PI, GroupStats,
                        StarStage, build_stage, coefficient_deterministic,
                        coefficient_random, group_stats, vertex_angles)
from .forcing import (ForcingField, GridFunction, angular_average,
                      builtin_field, cesaro_forcing_average, edge_load_moment,
                      manufactured_exact, manufactured_exact_deriv,
                      manufactured_profile, profile_moment)
from .femsolve import (ArrowheadSystem, StageSolution, assemble,
                       assemble_loads, center_flux_sum,
                       center_identity_residual, edge_flux_at_center,
                       edge_identity_residual, manufactured_case, solve,
                       solve_stage)
from .upscale import (HomogenizedSolution, OracleEntry, UpscaledProblem,
                      analytic_oracle, build_upscaled, center_limit,
                      predicted_edge_flux, solve_upscaled,
                      weighted_flux_defect)
from .analysis import (CauchyRow, ConvergenceRow, cauchy_diagnostics,
                       cesaro_solution_average, continuum_error_norms,
                       convergence_table, grid_norms, rate_estimate,
                       rate_from_errors, reading_report, reference_grids,
                       sample_grid, solve_example_stage, weyl_cos_mean,
                       weyl_fraction)
from .expcli import ExperimentConfig, load_config, parse_config, run

__version__ = "0.1.0"

__all__ = [
    "PRNG_NAME",
    "StarFemError", "InvalidArgumentError", "NumericalBreakdownError",
    "EmptyGroupError", "UndefinedRateError", "ConfigError",
    "GROUP_PROBS", "GROUP_VALUES", "TWO_PI", "StarStage", "GroupStats",
    "vertex_angles", "coefficient_deterministic", "coefficient_random",
    "build_stage", "group_stats",
    "ForcingField", "GridFunction", "builtin_field", "edge_load_moment",
    "profile_moment", "cesaro_forcing_average", "angular_average",
    "manufactured_profile", "manufactured_exact", "manufactured_exact_deriv",
    "ArrowheadSystem", "StageSolution", "assemble", "assemble_loads",
    "solve", "solve_stage", "center_identity_residual",
    "edge_identity_residual", "edge_flux_at_center", "center_flux_sum",
    "manufactured_case",
    "UpscaledProblem", "HomogenizedSolution", "OracleEntry",
    "solve_upscaled", "center_limit", "predicted_edge_flux",
    "build_upscaled", "analytic_oracle", "weighted_flux_defect",
    "ConvergenceRow", "CauchyRow", "cesaro_solution_average", "grid_norms",
    "continuum_error_norms", "convergence_table", "cauchy_diagnostics",
    "rate_estimate", "rate_from_errors", "weyl_fraction", "weyl_cos_mean",
    "sample_grid", "solve_example_stage", "reference_grids",
    "reading_report",
    "ExperimentConfig", "parse_config", "load_config", "run",
]
