"""Locomotion scoring: reward, simulation, gait search and the external protocol."""
from .external import Endpoint, evaluate_many, external_evaluate
from .gait import ZERO_GAIT, GaitParams, random_gait
from .reward import (PREFERENCES, TERMS, CommandProfile, RewardBreakdown, RewardWeights, StepState,
                     compute_fitness, reward_batch, reward_step)
from .search import EvaluationResult, optimize_gait
from .sim import SimConfig, Simulator, Trajectory, build_mjcf, rollout

__all__ = [
    "Endpoint", "evaluate_many", "external_evaluate", "ZERO_GAIT", "GaitParams", "random_gait",
    "PREFERENCES", "TERMS", "CommandProfile", "RewardBreakdown", "RewardWeights", "StepState",
    "compute_fitness", "reward_batch", "reward_step", "EvaluationResult", "optimize_gait",
    "SimConfig", "Simulator", "Trajectory", "build_mjcf", "rollout",
]
