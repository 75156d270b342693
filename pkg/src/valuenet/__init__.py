"""Value networks for binary bilevel programs.

Build exact or budgeted networks of the follower value function, turn them
into single-level MILP relaxations, tighten approximate terminals with a
sampled max-min problem and solve to optimality with blocking cuts.
"""

from .approx import Hyperrectangle, MergePolicy, build_approx, merge_rects, prune_infeasible_rect, shift_rect
from .catalog import CATALOG, indicator_gap_instance, merge_instance, reduction_instance
from .flow import FlowPolytope, build_flow_polytope
from .follower import FollowerOracle, FollowerResult, eval_phi, eval_phibar, phi_identity_check
from .formats import FormatError, load_instance, parse_mps_aux, read_native, save_instance, write_mps_aux, write_native
from .generator import GeneratorConfig, SplitMix64, budget_schedule, generate_structured
from .instance import BilevelInstance, InstanceError, interaction_stats, scale_to_integer, validate_instance
from .network import (NetworkTooLarge, ValueNetwork, build_state_network, find_symmetric_pair, isomorphic,
                      lookup_value, minimal_widths, reduce, to_dot)
from .oracle import OracleResult, OracleTooLarge, brute_force_bilevel
from .reformulation import (BlockingCutState, add_blocking_cut, build_hpr, build_indicator_bilevel,
                            build_indicator_model, build_strengthened, compute_big_m)
from .solver import SolvePolicy, SolveReport, check_bilevel_feasible, solve_exact, solve_relaxation
from .strengthen import (RobustModelParams, SampleSet, init_samples, solve_sampled_maxmin, strengthen_network,
                         strengthen_terminal)

__version__ = "0.1.0"

__all__ = [
    "BilevelInstance", "BlockingCutState", "CATALOG", "FlowPolytope", "FollowerOracle", "FollowerResult",
    "FormatError", "GeneratorConfig", "Hyperrectangle", "InstanceError", "MergePolicy", "NetworkTooLarge",
    "OracleResult", "OracleTooLarge", "RobustModelParams", "SampleSet", "SolvePolicy", "SolveReport",
    "SplitMix64", "ValueNetwork", "add_blocking_cut", "brute_force_bilevel", "budget_schedule",
    "build_approx", "build_flow_polytope", "build_hpr", "build_indicator_bilevel", "build_indicator_model",
    "build_state_network", "build_strengthened", "check_bilevel_feasible", "compute_big_m", "eval_phi",
    "eval_phibar", "find_symmetric_pair", "generate_structured", "indicator_gap_instance", "init_samples",
    "interaction_stats", "isomorphic", "load_instance", "lookup_value", "merge_instance", "merge_rects",
    "minimal_widths", "parse_mps_aux", "phi_identity_check", "prune_infeasible_rect", "read_native",
    "reduce", "reduction_instance", "save_instance", "scale_to_integer", "shift_rect", "solve_exact",
    "solve_relaxation", "solve_sampled_maxmin", "strengthen_network", "strengthen_terminal", "to_dot",
    "validate_instance", "write_mps_aux", "write_native",
]
