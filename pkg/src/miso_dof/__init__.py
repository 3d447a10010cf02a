"""Two-user MISO broadcast planner and simulator for imperfect and delayed CSIT.

Planner: exact (rational) DoF regions, corner points, and feedback-planning
corollaries.  Simulator: phase-Markov transmission scheme with interference
quantize-and-forward and backward decoding, used to check measured rate
scaling against the planner's predictions.
"""

from .exponents import (ExponentAverages, ExponentProfile, PeriodicFeedbackSpec,
                        alternating_csit_map, averages, label_users, make_periodic_profile,
                        mat_profile, periodic_spec, profile)
from .region import (AlphaMax, BetaMax, CornerReport, DofPoint, DofRegion, NotTight,
                     allowable_delay, corner_points, imperfect_delayed_threshold,
                     inner_region, optimal_region, outer_region, plan_regions,
                     scheme_params_for_corner, sufficient_feedback, symmetry_gain)
from .allocation import (AllocationPlan, PhaseBudget, dof_from_params, phase_budget,
                         plan_phase, plan_terminal_phase, solve_delta_sequence,
                         solve_last_phase)
from .lattice import (LatticeCode, WhitenedObservation, build_code, certify,
                      code_with_bits, decode, encode, min_product_distance,
                      rotation_matrix, unitarity_residual)
from .mlsearch import ml_search
from .simulator import (ChannelTrace, CsitTrace, RunResult, SimKnobs,
                        generate_channel, generate_csit, make_design,
                        quantize_interference, run_scheme)
from .harness import (ExperimentConfig, RatePoint, RateReport, VerdictTable,
                      compare, config_from_json_dict, export, fit_dof_slope,
                      load_json, resolve_point, run_experiment)

__all__ = [
    "ExponentAverages", "ExponentProfile", "PeriodicFeedbackSpec",
    "alternating_csit_map", "averages", "label_users", "make_periodic_profile",
    "mat_profile", "periodic_spec", "profile",
    "AlphaMax", "BetaMax", "CornerReport", "DofPoint", "DofRegion", "NotTight",
    "allowable_delay", "corner_points", "imperfect_delayed_threshold",
    "inner_region", "optimal_region", "outer_region", "plan_regions",
    "scheme_params_for_corner", "sufficient_feedback", "symmetry_gain",
    "AllocationPlan", "PhaseBudget", "dof_from_params", "phase_budget",
    "plan_phase", "plan_terminal_phase", "solve_delta_sequence", "solve_last_phase",
    "LatticeCode", "WhitenedObservation", "build_code", "certify", "code_with_bits",
    "decode", "encode", "min_product_distance", "rotation_matrix", "unitarity_residual",
    "ml_search",
    "ChannelTrace", "CsitTrace", "RunResult", "SimKnobs", "generate_channel",
    "generate_csit", "make_design", "quantize_interference", "run_scheme",
    "ExperimentConfig", "RatePoint", "RateReport", "VerdictTable", "compare",
    "config_from_json_dict", "export", "fit_dof_slope", "load_json",
    "resolve_point", "run_experiment",
]

__version__ = "0.1.0"
