"""Steering running-average vector costs in Stackelberg stochastic games.

Exact min-max planning for scalarized directions, a Blackwell-style
steering controller with approachability condition checkers, a
two-timescale Q-learner for the unknown-kernel case, and a seeded
simulation harness.
"""

from .adversaries import (
    AdversaryContext,
    AdversarySpec,
    ScriptedAdversary,
    StationaryAdversary,
    UniformRandomAdversary,
    WorstCaseAdversary,
    build_adversary,
)
from .config import RunConfig, load_config
from .controller import (
    ApproachabilityCertificate,
    SteeringController,
    check_approachable_convex,
    check_approachable_nonconvex,
    unit_directions,
)
from .game import (
    GameModel,
    IrreducibilityReport,
    NotUnichainError,
    OccupationMeasure,
    StationaryPolicyPair,
    ValidationReport,
    check_irreducibility,
    ergodic_cost,
    load_model,
    matching_pennies_game,
    occupation_measure,
    random_game,
    sample_transition,
    save_model,
    stationary_distribution,
    two_state_chain_game,
    validate_model,
)
from .learner import LearnerConfig, TwoTimescaleLearner, reference_value, schedules
from .planner import (
    PlannerConvergenceError,
    PlannerOptions,
    PlannerSolution,
    ScalarGame,
    brute_force_value,
    follower_best_response,
    scalarize,
    solve_minmax,
)
from .reporting import read_trajectory_csv, render_svg, run_batch, write_trajectory_csv
from .simulate import TrajectoryMetrics, TrajectoryRecord, metrics, run_episode
from .targets import Ball, Box, HalfspaceIntersection, TargetSet, Union, load_target, target_from_dict

__all__ = [
    "AdversaryContext",
    "AdversarySpec",
    "ApproachabilityCertificate",
    "Ball",
    "Box",
    "GameModel",
    "HalfspaceIntersection",
    "IrreducibilityReport",
    "LearnerConfig",
    "NotUnichainError",
    "OccupationMeasure",
    "PlannerConvergenceError",
    "PlannerOptions",
    "PlannerSolution",
    "RunConfig",
    "ScalarGame",
    "ScriptedAdversary",
    "StationaryAdversary",
    "StationaryPolicyPair",
    "SteeringController",
    "TargetSet",
    "TrajectoryMetrics",
    "TrajectoryRecord",
    "TwoTimescaleLearner",
    "UniformRandomAdversary",
    "Union",
    "ValidationReport",
    "WorstCaseAdversary",
    "brute_force_value",
    "build_adversary",
    "check_approachable_convex",
    "check_approachable_nonconvex",
    "check_irreducibility",
    "ergodic_cost",
    "follower_best_response",
    "load_config",
    "load_model",
    "load_target",
    "matching_pennies_game",
    "metrics",
    "occupation_measure",
    "random_game",
    "read_trajectory_csv",
    "reference_value",
    "render_svg",
    "run_batch",
    "run_episode",
    "sample_transition",
    "save_model",
    "scalarize",
    "schedules",
    "solve_minmax",
    "stationary_distribution",
    "target_from_dict",
    "two_state_chain_game",
    "unit_directions",
    "validate_model",
    "write_trajectory_csv",
]
