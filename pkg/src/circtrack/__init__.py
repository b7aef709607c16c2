"""Minimum-cost circulation tracking: graph construction, solvers, and pipeline."""

from circtrack.graph_model import (
    ArcKind,
    CirculationNetwork,
    Detection,
    ValidationReport,
    build_network,
    validate_network,
)
from circtrack.cost_models import (
    CostAssignment,
    CostModelConfig,
    EmpiricalDistanceModel,
    fit_empirical_distance,
    gate_transitions,
    groundtruth_observation_costs,
    probabilistic_costs,
    refine_costs,
)
from circtrack.mcc_solver import SolveOptions, SolveResult, solve
from circtrack.baseline_solvers import (
    FlowNetwork,
    brute_force_oracle,
    dssp_solve,
    ssp_solve,
)
from circtrack.quadratic_fw import QuadraticObjective, frank_wolfe, round_solution
from circtrack.tracking_pipeline import (
    PipelineConfig,
    RunReport,
    Trajectory,
    TrajectorySet,
    benchmark,
    flow_to_trajectories,
    ingest_detections,
    run_tracking,
)

__all__ = [
    "ArcKind",
    "CirculationNetwork",
    "CostAssignment",
    "CostModelConfig",
    "Detection",
    "EmpiricalDistanceModel",
    "FlowNetwork",
    "PipelineConfig",
    "QuadraticObjective",
    "RunReport",
    "SolveOptions",
    "SolveResult",
    "Trajectory",
    "TrajectorySet",
    "ValidationReport",
    "benchmark",
    "brute_force_oracle",
    "build_network",
    "dssp_solve",
    "fit_empirical_distance",
    "flow_to_trajectories",
    "frank_wolfe",
    "gate_transitions",
    "groundtruth_observation_costs",
    "ingest_detections",
    "probabilistic_costs",
    "refine_costs",
    "round_solution",
    "run_tracking",
    "solve",
    "ssp_solve",
    "validate_network",
]
