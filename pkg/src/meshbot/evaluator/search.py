"""Inner loop: black-box search over gait parameters, scored by the episode reward."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EvaluationError
from ..model.assembly import KineticRobotModel
from .gait import STEP_SCALE, GaitParams, random_gait
from .reward import CommandProfile, RewardWeights, compute_fitness
from .sim import SimConfig, Simulator, Trajectory

DEFAULT_BUDGET = 50
N_EXPLORE = 32        # random gaits drawn before local search starts
MIN_SIGMA = 0.02


@dataclass
class EvaluationResult:
    mean_episode_reward: float
    velocity_term_sum: float
    energy_term_sum: float            # J, non-negative
    fitness: float
    gait_params: GaitParams | None
    seed: int
    preference: str = "none"
    forward_velocity: float = 0.0
    evaluations: int = 1
    failed: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def energy_penalty_sum(self) -> float:
        return -self.energy_term_sum

    def rescored(self, preference: str) -> "EvaluationResult":
        """Same sums, fitness recomputed under another preference."""
        fit = 0.0 if self.failed else compute_fitness(self.mean_episode_reward, self.velocity_term_sum,
                                                      self.energy_penalty_sum, preference)
        return EvaluationResult(self.mean_episode_reward, self.velocity_term_sum, self.energy_term_sum, fit,
                                self.gait_params, self.seed, preference, self.forward_velocity,
                                self.evaluations, self.failed, dict(self.extra))

    def to_dict(self) -> dict:
        return {
            "mean_episode_reward": self.mean_episode_reward,
            "velocity_term_sum": self.velocity_term_sum,
            "energy_term_sum": self.energy_term_sum,
            "fitness": self.fitness,
            "gait_params": self.gait_params.to_dict() if self.gait_params else None,
            "seed": self.seed,
            "preference": self.preference,
            "forward_velocity": self.forward_velocity,
            "evaluations": self.evaluations,
            "failed": self.failed,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationResult":
        gait = GaitParams.from_dict(d["gait_params"]) if d.get("gait_params") else None
        return cls(float(d["mean_episode_reward"]), float(d["velocity_term_sum"]), float(d["energy_term_sum"]),
                   float(d["fitness"]), gait, int(d.get("seed", 0)), d.get("preference", "none"),
                   float(d.get("forward_velocity", 0.0)), int(d.get("evaluations", 1)),
                   bool(d.get("failed", False)), dict(d.get("extra", {})))


def result_from_trajectory(traj: Trajectory, gait: GaitParams, seed: int, preference: str = "none") -> EvaluationResult:
    if traj.failed:
        return EvaluationResult(0.0, 0.0, 0.0, 0.0, gait, seed, preference, 0.0, 1, True,
                                {"reason": traj.reason})
    reward = traj.total_reward
    vel = float(np.sum(traj.rewards["lin_vel_tracking"]))
    energy = traj.energy
    return EvaluationResult(reward, vel, energy, compute_fitness(reward, vel, -energy, preference), gait, seed,
                            preference, traj.forward_velocity)


def failed_result(seed: int, preference: str, reason: str) -> EvaluationResult:
    return EvaluationResult(0.0, 0.0, 0.0, 0.0, None, seed, preference, 0.0, 0, True, {"reason": reason})


def optimize_gait(model: KineticRobotModel, command: CommandProfile = CommandProfile(),
                  budget: int = DEFAULT_BUDGET, seed: int = 0, sim: SimConfig = SimConfig(),
                  weights: RewardWeights = RewardWeights(), preference: str = "none",
                  history: list | None = None) -> tuple[GaitParams | None, EvaluationResult]:
    """Random exploration followed by elitist (1+1) search with a one-fifth
    success rule on the step size.

    The first ``N_EXPLORE`` evaluations are seeded random gaits; later ones
    perturb the best gait so far. The exploration length does not depend on
    the budget, so a larger budget replays a smaller one's evaluations.
    Candidates are ranked by episode reward, which is what a trained policy
    would maximize; the preference only sets the reported fitness.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    try:
        simulator = Simulator(model, sim)
    except EvaluationError as exc:
        return None, failed_result(seed, preference, str(exc))
    limit = simulator.limit
    best_gait, best, best_score = None, None, -math.inf
    local, local_score, sigma = None, -math.inf, 1.0
    for i in range(budget):
        if i < N_EXPLORE or local is None:
            gait = random_gait(rng, limit)
        else:
            step = sigma * STEP_SCALE * rng.standard_normal(len(STEP_SCALE))
            gait = GaitParams.from_vector(local.to_vector() + step, limit)
        traj = simulator.rollout(gait, command, weights, seed)
        result = result_from_trajectory(traj, gait, seed, preference)
        score = -math.inf if result.failed else result.mean_episode_reward
        if history is not None:
            history.append(score)
        if best is None or score > best_score:
            best_gait, best, best_score = gait, result, score
        if i < N_EXPLORE:
            if score > local_score:
                local, local_score = gait, score
            continue
        if score > local_score:
            local, local_score = gait, score
            sigma = min(sigma * 1.5, 2.0)
        else:
            sigma = max(sigma * 1.5 ** -0.25, MIN_SIGMA)
    best.evaluations = budget
    if best.failed:
        best.fitness = 0.0
        return None, best
    return best_gait, best
