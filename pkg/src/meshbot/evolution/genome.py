"""Genetic representation and the design repository it indexes into.

A genome names a body, an upper-limb set and a lower-limb set by the id of the
design they were harvested from, plus one leg scale index and one axis per
joint level. Every choice is made once per body level and applied to all four
legs, so symmetry holds by construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..model.assembly import AXES, ElectronicsSpec, Joint, KineticRobotModel, Link
from ..model.bank import N_SCALES, SCALE_STEP, VariantBank, elongate
from ..model.store import load_model, save_model
from ..segmentation import LEG_TAGS

LIMB_LEVELS = ("upper", "lower")
JOINT_LEVELS = ("shoulder", "knee")


@dataclass(frozen=True)
class RobotGenome:
    source_id: str
    body: str
    upper: str
    lower: str
    scale: int = 0
    shoulder_axis: str = "x"
    knee_axis: str = "x"

    def __post_init__(self):
        if not 0 <= self.scale < N_SCALES:
            raise ValueError(f"leg scale index must be in 0..{N_SCALES - 1}")
        if self.shoulder_axis not in AXES or self.knee_axis not in AXES:
            raise ValueError("joint axes must be x, y or z")

    @property
    def key(self) -> str:
        """Content key: equal keys build identical robots."""
        return (f"b={self.body}|u={self.upper}|l={self.lower}|s{self.scale}"
                f"|{self.shoulder_axis}{self.knee_axis}")

    def limb(self, level: str) -> str:
        return getattr(self, level)

    def axis(self, level: str) -> str:
        return getattr(self, f"{level}_axis")

    def with_limb(self, level: str, design: str) -> "RobotGenome":
        return replace(self, **{level: design})

    def with_axis(self, level: str, axis: str) -> "RobotGenome":
        return replace(self, **{f"{level}_axis": axis})

    def to_dict(self) -> dict:
        return {"source_id": self.source_id, "body": self.body, "upper": self.upper, "lower": self.lower,
                "scale": self.scale, "shoulder_axis": self.shoulder_axis, "knee_axis": self.knee_axis}

    @classmethod
    def from_dict(cls, d: dict) -> "RobotGenome":
        return cls(d["source_id"], d["body"], d["upper"], d["lower"], int(d["scale"]),
                   d["shoulder_axis"], d["knee_axis"])


@dataclass
class BodyPart:
    base: Link
    shoulders: dict          # tag -> (origin, frame) in world
    electronics: ElectronicsSpec
    density: float


@dataclass
class UpperPart:
    link: Link               # mesh and inertial in the shoulder frame
    knee_origin: np.ndarray  # knee pose relative to the shoulder frame
    knee_frame: np.ndarray


@dataclass
class DesignRepository:
    """Bodies and limb sets harvested from scale-0 models, keyed by design id."""

    models: dict = field(default_factory=dict)
    bodies: dict = field(default_factory=dict)
    uppers: dict = field(default_factory=dict)
    lowers: dict = field(default_factory=dict)

    def register(self, model: KineticRobotModel, design_id: str | None = None) -> str:
        design_id = design_id or model.source_id or model.name
        if design_id in self.models:
            raise ConfigError(f"design {design_id!r} is already registered")
        if model.leg_scale_index != 0:
            raise ConfigError("register the scale-0 model of a bank")
        self.models[design_id] = model
        shoulders = {}
        uppers, lowers = {}, {}
        for tag in LEG_TAGS:
            s = model.joint(f"{tag}_shoulder")
            k = model.joint(f"{tag}_knee")
            shoulders[tag] = (s.origin.copy(), s.frame.copy())
            up = model.links[f"{tag}_upper"]
            uppers[tag] = UpperPart(up, s.frame.T @ (k.origin - s.origin), s.frame.T @ k.frame)
            lowers[tag] = model.links[f"{tag}_lower"]
        self.bodies[design_id] = BodyPart(model.links["base"], shoulders, model.electronics, model.density)
        self.uppers[design_id] = uppers
        self.lowers[design_id] = lowers
        return design_id

    def register_bank(self, bank: VariantBank) -> str:
        base = min(bank.models, key=lambda m: m.leg_scale_index)
        if base.leg_scale_index != 0:
            raise ConfigError(f"bank {bank.source_id!r} has no scale-0 variant")
        return self.register(base, bank.source_id)

    @property
    def ids(self) -> list[str]:
        return sorted(self.models)

    def options(self, kind: str) -> list[str]:
        table = {"body": self.bodies, "upper": self.uppers, "lower": self.lowers}[kind]
        return sorted(table)

    def check(self, g: RobotGenome) -> None:
        for kind in ("body", "upper", "lower"):
            if getattr(g, kind) not in self.options(kind):
                raise ConfigError(f"genome refers to unknown {kind} {getattr(g, kind)!r}")

    def build(self, g: RobotGenome) -> KineticRobotModel:
        """Assemble the robot a genome describes."""
        self.check(g)
        body = self.bodies[g.body]
        links = {"base": body.base}
        joints = []
        for tag in LEG_TAGS:
            so, sf = body.shoulders[tag]
            up = self.uppers[g.upper][tag]
            lo = self.lowers[g.lower][tag]
            ko = so + sf @ up.knee_origin
            kf = sf @ up.knee_frame
            links[f"{tag}_upper"] = Link(f"{tag}_upper", "upper", up.link.mesh, so, sf, up.link.inertial)
            links[f"{tag}_lower"] = Link(f"{tag}_lower", "lower", lo.mesh, ko, kf, lo.inertial)
            joints.append(Joint(f"{tag}_shoulder", "shoulder", "base", f"{tag}_upper", so.copy(), sf.copy()))
            joints.append(Joint(f"{tag}_knee", "knee", f"{tag}_upper", f"{tag}_lower", ko, kf))
        model = KineticRobotModel(g.key, links, joints, body.electronics, body.density, g.source_id)
        model = elongate(model, g.scale * SCALE_STEP).with_axes(g.shoulder_axis, g.knee_axis)
        model.name = g.key
        model.leg_scale_index = g.scale
        return model

    # persistence: one stored model per design
    def save(self, directory) -> Path:
        directory = Path(directory)
        index = {}
        for design_id, model in sorted(self.models.items()):
            path = save_model(model, directory / f"{design_id}.json")
            index[design_id] = path.name
        out = directory / "repository.json"
        out.write_text(json.dumps({"designs": index}, indent=1, sort_keys=True))
        return out

    @classmethod
    def load(cls, directory) -> "DesignRepository":
        directory = Path(directory)
        path = directory / "repository.json"
        if not path.exists():
            raise ConfigError(f"no design repository at {directory}")
        repo = cls()
        for design_id, name in json.loads(path.read_text())["designs"].items():
            repo.register(load_model(directory / name), design_id)
        return repo


def genome_symmetric(g: RobotGenome, model: KineticRobotModel, repo: DesignRepository) -> bool:
    """Check on the built robot that each body level made one choice for all four legs."""
    shoulder_axes = {j.axis for j in model.joints if j.kind == "shoulder"}
    knee_axes = {j.axis for j in model.joints if j.kind == "knee"}
    if shoulder_axes != {g.shoulder_axis} or knee_axes != {g.knee_axis}:
        return False
    drops = []
    for tag in LEG_TAGS:
        lower = model.links[f"{tag}_lower"]
        if lower.mesh is not repo.lowers[g.lower][tag].mesh:
            return False
        so, sf = repo.bodies[g.body].shoulders[tag]
        natural = so + sf @ repo.uppers[g.upper][tag].knee_origin
        drops.append(natural[2] - lower.origin[2])
    return bool(np.allclose(drops, g.scale * SCALE_STEP, atol=1e-12))
