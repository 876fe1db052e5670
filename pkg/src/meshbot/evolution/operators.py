"""Mutation and crossover on RobotGenome."""
from __future__ import annotations

import numpy as np

from ..model.assembly import AXES
from ..model.bank import N_SCALES
from .genome import JOINT_LEVELS, LIMB_LEVELS, DesignRepository, RobotGenome

MUTATION_CATEGORIES = ("limb_length", "limb_shape", "body_shape", "joint_axis", "none")
MUTATION_PROBS = (0.15, 0.15, 0.25, 0.40, 0.05)
JOINT_SWAP_PROB = 0.5
_THRESHOLDS = np.cumsum(MUTATION_PROBS)


def draw_category(rng: np.random.Generator) -> str:
    u = rng.random()
    return MUTATION_CATEGORIES[min(int(np.searchsorted(_THRESHOLDS, u, side="right")), 4)]


def _resample(rng, current, options):
    others = [o for o in options if o != current]
    if not others:
        return None
    return others[int(rng.integers(len(others)))]


def mutate(g: RobotGenome, repo: DesignRepository, rng: np.random.Generator) -> tuple[RobotGenome, dict]:
    """Apply exactly one mutation category; returns the child and its lineage note.

    A category with nothing to change to (a single-design repository, or a
    scale step past either end) degrades to a flagged no-op.
    """
    category = draw_category(rng)
    note = {"category": category}
    child = g
    if category == "limb_length":
        step = 1 if rng.random() < 0.5 else -1
        scale = int(np.clip(g.scale + step, 0, N_SCALES - 1))
        note["step"] = step
        if scale == g.scale:
            note["flag"] = "clamped"
        else:
            child = RobotGenome(g.source_id, g.body, g.upper, g.lower, scale, g.shoulder_axis, g.knee_axis)
    elif category == "limb_shape":
        level = LIMB_LEVELS[int(rng.integers(2))]
        new = _resample(rng, g.limb(level), repo.options(level))
        note["level"] = level
        if new is None:
            note["flag"] = "no_alternative"
        else:
            child = g.with_limb(level, new)
    elif category == "body_shape":
        new = _resample(rng, g.body, repo.options("body"))
        if new is None:
            note["flag"] = "no_alternative"
        else:
            child = RobotGenome(g.source_id, new, g.upper, g.lower, g.scale, g.shoulder_axis, g.knee_axis)
    elif category == "joint_axis":
        level = JOINT_LEVELS[int(rng.integers(2))]
        note["level"] = level
        child = g.with_axis(level, _resample(rng, g.axis(level), AXES))
    return child, note


def crossover(a: RobotGenome, b: RobotGenome, rng: np.random.Generator) -> tuple[RobotGenome, dict]:
    """Child starts as ``a`` and takes one gene level from ``b``.

    With probability one half a joint-axis level is swapped, otherwise a limb
    level. Swapping the upper limb brings ``b``'s leg scale with it, since the
    scale stretches the upper segment.
    """
    if rng.random() < JOINT_SWAP_PROB:
        level = JOINT_LEVELS[int(rng.integers(2))]
        return a.with_axis(level, b.axis(level)), {"swap": "joint", "level": level}
    level = LIMB_LEVELS[int(rng.integers(2))]
    child = a.with_limb(level, b.limb(level))
    if level == "upper":
        child = RobotGenome(child.source_id, child.body, child.upper, child.lower, b.scale,
                            child.shoulder_axis, child.knee_axis)
    return child, {"swap": "limb", "level": level}
