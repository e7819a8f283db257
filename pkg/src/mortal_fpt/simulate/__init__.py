"""Monte Carlo first-passage engine with survival weighting."""
from __future__ import annotations

from .engine import (
    HittingProbability,
    OutcomeBatch,
    SimulationConfig,
    TrajectoryOutcome,
    absorb_partial,
    compile_problem,
    dump_outcomes,
    estimate_conditional_moments,
    estimate_from_outcomes,
    estimate_hitting_probability,
    hitting_probability_from_outcomes,
    run_trajectories,
    sample_path_fpt,
)

__all__ = [
    "HittingProbability",
    "OutcomeBatch",
    "SimulationConfig",
    "TrajectoryOutcome",
    "absorb_partial",
    "compile_problem",
    "dump_outcomes",
    "estimate_conditional_moments",
    "estimate_from_outcomes",
    "estimate_hitting_probability",
    "hitting_probability_from_outcomes",
    "run_trajectories",
    "sample_path_fpt",
]
