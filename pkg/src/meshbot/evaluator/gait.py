"""Symmetric sinusoidal gait: one shared frequency, per-level amplitude, offset and
phase, and a phase offset per leg.

    q*_{leg, level}(t) = offset_level + amplitude_level * sin(2 pi f t + phase_level + leg_phase_leg)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..segmentation import LEG_TAGS

LEVELS = ("shoulder", "knee")
MAX_FREQUENCY = 4.0
MIN_FREQUENCY = 0.1


@dataclass(frozen=True)
class GaitParams:
    frequency: float = 1.0
    amplitude: tuple = (0.0, 0.0)      # shoulder, knee
    offset: tuple = (0.0, 0.0)
    phase: tuple = (0.0, 0.0)
    leg_phase: tuple = (0.0, 0.0, 0.0, 0.0)   # LEG_TAGS order

    def __post_init__(self):
        for name in ("amplitude", "offset", "phase", "leg_phase"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if not 0 < self.frequency <= MAX_FREQUENCY:
            raise ValueError(f"frequency must be in (0, {MAX_FREQUENCY}] Hz")

    def check(self, limit: float) -> None:
        for a, o in zip(self.amplitude, self.offset):
            if a < 0 or abs(o) + a > limit + 1e-12:
                raise ValueError("gait exceeds the joint limits")

    def targets(self, t: float, joint_order) -> np.ndarray:
        """Target angles at time ``t`` for joints named ``{tag}_{level}``."""
        out = np.empty(len(joint_order))
        w = 2.0 * math.pi * self.frequency * t
        for i, name in enumerate(joint_order):
            tag, level = name.rsplit("_", 1)
            k, li = LEG_TAGS.index(tag), LEVELS.index(level)
            out[i] = self.offset[li] + self.amplitude[li] * math.sin(w + self.phase[li] + self.leg_phase[k])
        return out

    def target_table(self, times, joint_order) -> np.ndarray:
        """(T, n_joints) targets, vectorized over ``times``."""
        times = np.asarray(times, dtype=float)
        w = 2.0 * np.pi * self.frequency * times
        cols = []
        for name in joint_order:
            tag, level = name.rsplit("_", 1)
            k, li = LEG_TAGS.index(tag), LEVELS.index(level)
            cols.append(self.offset[li] + self.amplitude[li] * np.sin(w + self.phase[li] + self.leg_phase[k]))
        return np.stack(cols, axis=1)

    # flat vector form for the search: f, A_s, A_k, o_s, o_k, phi_s, phi_k, psi_0..3
    def to_vector(self) -> np.ndarray:
        return np.array([self.frequency, *self.amplitude, *self.offset, *self.phase, *self.leg_phase])

    @classmethod
    def from_vector(cls, x, limit: float) -> "GaitParams":
        """Build from a vector, projecting it onto the feasible set."""
        x = np.asarray(x, dtype=float)
        f = float(np.clip(x[0], MIN_FREQUENCY, MAX_FREQUENCY))
        amp = np.clip(x[1:3], 0.0, limit)
        off = np.clip(x[3:5], -limit, limit)
        off = np.clip(off, -(limit - amp), limit - amp)
        wrap = lambda p: (np.asarray(p) + np.pi) % (2 * np.pi) - np.pi  # noqa: E731
        return cls(f, tuple(amp), tuple(off), tuple(wrap(x[5:7])), tuple(wrap(x[7:11])))

    def to_dict(self) -> dict:
        return {"frequency": self.frequency, "amplitude": list(self.amplitude), "offset": list(self.offset),
                "phase": list(self.phase), "leg_phase": list(self.leg_phase)}

    @classmethod
    def from_dict(cls, d: dict) -> "GaitParams":
        return cls(d["frequency"], tuple(d["amplitude"]), tuple(d["offset"]), tuple(d["phase"]),
                   tuple(d["leg_phase"]))


ZERO_GAIT = GaitParams()


def random_gait(rng: np.random.Generator, limit: float) -> GaitParams:
    x = np.concatenate([
        rng.uniform(0.5, 2.5, 1),
        rng.uniform(0.1, 0.6, 2),
        rng.uniform(-0.3, 0.3, 2),
        rng.uniform(-np.pi, np.pi, 6),
    ])
    return GaitParams.from_vector(x, limit)


# Gaussian step sizes per vector component
STEP_SCALE = np.array([0.3, 0.15, 0.15, 0.1, 0.1, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6])
