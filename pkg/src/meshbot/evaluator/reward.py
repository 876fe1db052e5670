"""Per-step locomotion reward: baseline terms plus the two user-weighted terms."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..errors import EvaluationError

TERMS = ("lin_vel_tracking", "ang_vel_tracking", "lin_vel_z", "ang_vel_xy", "joint_acc",
         "joint_torque", "action_rate", "orientation", "feet_air_time", "feet_stance_time",
         "user_lin_vel_tracking", "user_joint_power")


@dataclass(frozen=True)
class CommandProfile:
    v_star_xy: tuple = (0.3, 0.0)
    omega_star_z: float = 0.0
    duration: float = 5.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("command duration must be positive")
        object.__setattr__(self, "v_star_xy", tuple(float(v) for v in self.v_star_xy))

    def to_dict(self) -> dict:
        return {"v_star_xy": list(self.v_star_xy), "omega_star_z": self.omega_star_z,
                "duration": self.duration}

    @classmethod
    def from_dict(cls, d: dict) -> "CommandProfile":
        return cls(tuple(d.get("v_star_xy", (0.3, 0.0))), float(d.get("omega_star_z", 0.0)),
                   float(d.get("duration", 5.0)))


@dataclass(frozen=True)
class RewardWeights:
    """Baseline weights are multiplied by dt; alpha1 and alpha2 are not."""

    alpha1: float = 0.0
    alpha2: float = 0.0
    lin_vel_tracking: float = 1.0
    ang_vel_tracking: float = 0.5
    lin_vel_z: float = -4.0
    ang_vel_xy: float = -0.05
    joint_acc: float = -5e-7
    joint_torque: float = -2e-5
    action_rate: float = -5e-5
    orientation: float = -0.5
    feet_air_time: float = 0.1
    feet_stance_time: float = 0.1
    tracking_sigma: float = 0.25   # exponent factor of the tracking kernels
    phase_target: float = 0.5      # s, subtracted from each completed air/stance phase

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RewardWeights":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown reward weights: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass
class StepState:
    """Robot-frame quantities for one control step (x forward, y left, z up).

    ``t_air`` and ``t_stance`` hold each foot's running phase duration after
    this step; at the step a phase ends, they still hold the completed duration.
    """

    v: np.ndarray
    omega: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    q_star: np.ndarray
    tau: np.ndarray
    a: np.ndarray
    a_prev: np.ndarray
    g_b: np.ndarray
    foot_contact: np.ndarray
    prev_contact: np.ndarray
    t_air: np.ndarray
    t_stance: np.ndarray
    dt: float

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("foot_contact", "prev_contact"):
                setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=bool))
            elif f.name != "dt":
                setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=float))

    def check(self) -> None:
        for f in fields(self):
            val = getattr(self, f.name)
            if not np.all(np.isfinite(val)):
                raise EvaluationError(f"non-finite value in state field {f.name}")
        if abs(np.linalg.norm(self.g_b) - 1.0) > 1e-6:
            raise EvaluationError("gravity direction is not a unit vector")
        if not self.dt > 0:
            raise EvaluationError("dt must be positive")

    @property
    def action_rate(self) -> np.ndarray:
        return (self.a - self.a_prev) / self.dt


@dataclass
class RewardBreakdown:
    terms: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return math.fsum(self.terms.values())

    def __getitem__(self, name: str) -> float:
        return self.terms[name]

    def to_dict(self) -> dict:
        return {**self.terms, "total": self.total}


def reward_step(state: StepState, command: CommandProfile, w: RewardWeights = RewardWeights()) -> RewardBreakdown:
    state.check()
    dt = state.dt
    vs = np.asarray(command.v_star_xy)
    lin_err = float(np.sum((vs - state.v[:2]) ** 2))
    ang_err = (command.omega_star_z - state.omega[2]) ** 2
    kernel = math.exp(-w.tracking_sigma * lin_err)
    landed = state.foot_contact & ~state.prev_contact
    lifted = ~state.foot_contact & state.prev_contact
    terms = {
        "lin_vel_tracking": w.lin_vel_tracking * dt * kernel,
        "ang_vel_tracking": w.ang_vel_tracking * dt * math.exp(-w.tracking_sigma * ang_err),
        "lin_vel_z": w.lin_vel_z * dt * state.v[2] ** 2,
        "ang_vel_xy": w.ang_vel_xy * dt * float(np.sum(state.omega[:2] ** 2)),
        "joint_acc": w.joint_acc * dt * float(np.sum(state.q_ddot ** 2)),
        "joint_torque": w.joint_torque * dt * float(np.sum(state.tau ** 2)),
        "action_rate": w.action_rate * dt * float(np.sum(state.action_rate ** 2)),
        "orientation": w.orientation * dt * float(np.sum(state.g_b[:2] ** 2)),
        "feet_air_time": w.feet_air_time * dt * float(np.sum((state.t_air - w.phase_target) * landed)),
        "feet_stance_time": w.feet_stance_time * dt * float(np.sum((state.t_stance - w.phase_target) * lifted)),
        "user_lin_vel_tracking": w.alpha1 * kernel,
        "user_joint_power": w.alpha2 * float(np.sum(np.abs(state.q_dot * state.tau))),
    }
    return RewardBreakdown({k: float(terms[k]) for k in TERMS})


def reward_batch(arrays: dict, command: CommandProfile, w: RewardWeights, dt: float) -> dict:
    """Vectorized reward over T steps; ``arrays`` holds stacked StepState fields.

    Returns a dict of per-term arrays of length T plus ``total``.
    """
    for name, val in arrays.items():
        if val.dtype != bool and not np.all(np.isfinite(val)):
            raise EvaluationError(f"non-finite value in state field {name}")
    v, om = arrays["v"], arrays["omega"]
    vs = np.asarray(command.v_star_xy)
    kernel = np.exp(-w.tracking_sigma * np.sum((vs - v[:, :2]) ** 2, axis=1))
    landed = arrays["foot_contact"] & ~arrays["prev_contact"]
    lifted = ~arrays["foot_contact"] & arrays["prev_contact"]
    rate = (arrays["a"] - arrays["a_prev"]) / dt
    out = {
        "lin_vel_tracking": w.lin_vel_tracking * dt * kernel,
        "ang_vel_tracking": w.ang_vel_tracking * dt * np.exp(-w.tracking_sigma * (command.omega_star_z - om[:, 2]) ** 2),
        "lin_vel_z": w.lin_vel_z * dt * v[:, 2] ** 2,
        "ang_vel_xy": w.ang_vel_xy * dt * np.sum(om[:, :2] ** 2, axis=1),
        "joint_acc": w.joint_acc * dt * np.sum(arrays["q_ddot"] ** 2, axis=1),
        "joint_torque": w.joint_torque * dt * np.sum(arrays["tau"] ** 2, axis=1),
        "action_rate": w.action_rate * dt * np.sum(rate ** 2, axis=1),
        "orientation": w.orientation * dt * np.sum(arrays["g_b"][:, :2] ** 2, axis=1),
        "feet_air_time": w.feet_air_time * dt * np.sum((arrays["t_air"] - w.phase_target) * landed, axis=1),
        "feet_stance_time": w.feet_stance_time * dt * np.sum((arrays["t_stance"] - w.phase_target) * lifted, axis=1),
        "user_lin_vel_tracking": w.alpha1 * kernel,
        "user_joint_power": w.alpha2 * np.sum(np.abs(arrays["q_dot"] * arrays["tau"]), axis=1),
    }
    out["total"] = np.sum([out[k] for k in TERMS], axis=0)
    return out


# --- fitness --------------------------------------------------------------------

VELOCITY_SCALE = 20.0
ENERGY_SCALE = 10.0
PREFERENCES = ("none", "velocity", "energy")


def compute_fitness(reward: float, velocity_term_sum: float, energy_penalty_sum: float,
                    preference: str = "none") -> float:
    """Preference-scaled fitness. ``energy_penalty_sum`` is negative-signed."""
    if preference not in PREFERENCES:
        raise ValueError(f"preference must be one of {PREFERENCES}")
    if not all(math.isfinite(x) for x in (reward, velocity_term_sum, energy_penalty_sum)):
        raise EvaluationError("fitness inputs must be finite")
    if preference == "velocity":
        return reward + VELOCITY_SCALE * velocity_term_sum
    if preference == "energy":
        return reward + ENERGY_SCALE * energy_penalty_sum
    return reward
