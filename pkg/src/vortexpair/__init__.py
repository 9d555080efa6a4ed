"""Steady vortex pairs in bounded planar domains.

Energy maximizers over rearrangement classes of sign-changing vorticity,
the Green/Robin machinery behind them, the point-vortex limit system,
and evolution/stability probes, all on one masked finite-difference
grid family.
"""

__version__ = "0.1.0"

from .grid import DomainSpec, Grid, build_grid, measure, plane_grid
from .fields import (ScalarField, VectorField, center_of_mass,
                     hardy_littlewood_suite, lp_norm, negative_part,
                     positive_part, read_field_text, rescale_profile,
                     riesz_suite, support_diameter, SuiteOutcome,
                     symmetric_decreasing_rearrangement, write_field_text,
                     write_pgm)
from .poisson import (PoissonSolver, SolveError, divergence, green_function,
                      regular_part, robin, solve_poisson, velocity)
from .kirchhoff import (KRConfiguration, KRMinimum, PVTrajectory, kr_gradient,
                        kr_minimize, kr_value, pv_evolve)
from .maximizer import (Prototype, RearrangementSpec, SteadyState,
                        best_response, bump_on_grid, cone_test_function,
                        energy, lagrange_multipliers, make_prototype,
                        maximize, monotone_map_check, place_prototype,
                        steadiness_residual)
from .euler import EulerState, StabilityResult, stability_experiment, step
from .asymptotics import (CheckResult, GradientMeasureResult, SweepPlan,
                          SweepRecord, SweepResult, ascent_check,
                          center_convergence_check, core_size_check,
                          energy_split, fit_energy_slope,
                          gradient_measure_diagnostic,
                          interaction_boundedness, multiplier_check,
                          profile_convergence, profile_distance, run_sweep,
                          signature, signature_distance)

__all__ = [
    "__version__",
    "DomainSpec", "Grid", "build_grid", "plane_grid", "measure",
    "ScalarField", "VectorField", "positive_part", "negative_part",
    "lp_norm", "center_of_mass", "support_diameter",
    "symmetric_decreasing_rearrangement", "rescale_profile",
    "write_field_text", "read_field_text", "write_pgm",
    "SuiteOutcome", "hardy_littlewood_suite", "riesz_suite",
    "PoissonSolver", "SolveError", "solve_poisson", "green_function",
    "regular_part", "robin", "velocity", "divergence",
    "KRConfiguration", "KRMinimum", "PVTrajectory", "kr_value",
    "kr_gradient", "kr_minimize", "pv_evolve",
    "RearrangementSpec", "Prototype", "SteadyState", "make_prototype",
    "place_prototype", "best_response", "energy", "maximize",
    "lagrange_multipliers", "monotone_map_check", "steadiness_residual",
    "bump_on_grid", "cone_test_function",
    "EulerState", "StabilityResult", "step", "stability_experiment",
    "SweepPlan", "SweepRecord", "SweepResult", "CheckResult",
    "GradientMeasureResult", "run_sweep", "energy_split",
    "profile_distance", "signature", "signature_distance",
    "fit_energy_slope", "interaction_boundedness", "core_size_check",
    "center_convergence_check", "multiplier_check", "profile_convergence",
    "ascent_check", "gradient_measure_diagnostic",
]
