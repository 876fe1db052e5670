"""Kinetic robot model: nine mesh links, eight revolute joints, electronics."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import AssemblyError, GeometryError
from ..mesh.core import MassProperties, TriangleMesh
from ..mesh.mass import mass_properties
from ..segmentation import LEG_TAGS, BodyPartition, JointSpec

DENSITY = 300.0          # kg/m^3, effective density of a sparsely filled print
JOINT_LIMIT = 1.57       # rad
JOINT_VELOCITY = 6.0     # rad/s
JOINT_EFFORT = 4.4       # N m
AXES = ("x", "y", "z")


@dataclass
class ElectronicsSpec:
    motor_size: tuple = (0.04, 0.02, 0.04)   # in the joint frame
    motor_mass: float = 0.065
    core_size: tuple = (0.08, 0.10, 0.03)
    core_mass: float = 0.55

    def to_dict(self) -> dict:
        return {"motor_size": list(self.motor_size), "motor_mass": self.motor_mass,
                "core_size": list(self.core_size), "core_mass": self.core_mass}

    @classmethod
    def from_dict(cls, d: dict) -> "ElectronicsSpec":
        return cls(tuple(d["motor_size"]), d["motor_mass"], tuple(d["core_size"]), d["core_mass"])


def box_inertia(size, mass) -> np.ndarray:
    a, b, c = size
    return mass / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])


@dataclass
class Link:
    """A rigid link. ``mesh`` and ``inertial`` are expressed in the link frame,
    which sits at ``origin`` with axes ``rotation`` (columns) in the world."""

    name: str
    role: str
    mesh: TriangleMesh
    origin: np.ndarray
    rotation: np.ndarray
    inertial: MassProperties

    def world_mesh(self) -> TriangleMesh:
        return self.mesh.transformed(self.rotation, self.origin)

    @property
    def mass(self) -> float:
        return self.inertial.mass


@dataclass
class Joint:
    name: str
    kind: str
    parent: str
    child: str
    origin: np.ndarray
    frame: np.ndarray
    axis: str = "x"
    limit: float = JOINT_LIMIT
    velocity: float = JOINT_VELOCITY
    effort: float = JOINT_EFFORT

    @property
    def axis_local(self) -> np.ndarray:
        return np.eye(3)["xyz".index(self.axis)]

    @property
    def axis_world(self) -> np.ndarray:
        return self.frame @ self.axis_local


@dataclass
class KineticRobotModel:
    name: str
    links: dict
    joints: list
    electronics: ElectronicsSpec
    density: float = DENSITY
    source_id: str = ""
    leg_scale_index: int = 0
    axes: dict = field(default_factory=lambda: {"shoulder": "x", "knee": "x"})

    def joint(self, name: str) -> Joint:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)

    @property
    def shell_mass(self) -> float:
        return sum(link.mass for link in self.links.values())

    @property
    def electronics_mass(self) -> float:
        return len(self.joints) * self.electronics.motor_mass + self.electronics.core_mass

    @property
    def total_mass(self) -> float:
        return self.shell_mass + self.electronics_mass

    def depth(self) -> int:
        parent = {j.child: j.parent for j in self.joints}
        best = 0
        for name in self.links:
            d = 0
            while name in parent:
                name = parent[name]
                d += 1
            best = max(best, d)
        return best

    def with_axes(self, shoulder: str, knee: str | None = None) -> "KineticRobotModel":
        """Copy with every joint of each level turned about the named frame axis."""
        knee = shoulder if knee is None else knee
        if shoulder not in AXES or knee not in AXES:
            raise ValueError("axis must be one of x, y, z")
        out = copy.copy(self)
        out.joints = [copy.copy(j) for j in self.joints]
        for j in out.joints:
            j.axis = shoulder if j.kind == "shoulder" else knee
        out.axes = {"shoulder": shoulder, "knee": knee}
        return out

    def check(self) -> None:
        if len(self.links) != 9 or len(self.joints) != 8:
            raise AssemblyError(f"expected 9 links and 8 joints, got {len(self.links)} and {len(self.joints)}")
        children = [j.child for j in self.joints]
        if len(set(children)) != len(children) or "base" in children:
            raise AssemblyError("joint tree has a link with two parents or a parented base")
        if self.depth() != 2:
            raise AssemblyError("kinematic tree must have depth 2")


def _local_link(name, role, world_mesh, origin, rotation, density) -> Link:
    local = world_mesh.transformed(rotation.T, -rotation.T @ origin)
    try:
        mp = mass_properties(local, density)
    except GeometryError as exc:
        raise AssemblyError(f"{name}: {exc}") from exc
    return Link(name, role, local, np.asarray(origin, float), np.asarray(rotation, float), mp)


def density_for_total_mass(partition: BodyPartition, electronics: ElectronicsSpec, total_mass: float) -> float:
    """Shell density that makes shells plus electronics weigh ``total_mass``."""
    volume = sum(mass_properties(m).volume for m in partition.meshes().values())
    shells = total_mass - 8 * electronics.motor_mass - electronics.core_mass
    if shells <= 0:
        raise AssemblyError("electronics alone exceed the requested total mass")
    return shells / volume


def assemble(partition: BodyPartition, electronics: ElectronicsSpec | None = None,
             density: float | None = DENSITY, total_mass: float | None = None,
             name: str = "robot", source_id: str = "", axis: str = "x") -> KineticRobotModel:
    """Wire base -> upper (shoulder) -> lower (knee) for each of the four legs."""
    electronics = electronics or ElectronicsSpec()
    if sorted(partition.legs) != sorted(LEG_TAGS):
        raise AssemblyError(f"partition must have legs {LEG_TAGS}, has {sorted(partition.legs)}")
    if total_mass is not None:
        density = density_for_total_mass(partition, electronics, total_mass)
    links = {"base": _local_link("base", "base", partition.base_link, np.zeros(3), np.eye(3), density)}
    joints = []
    for tag in LEG_TAGS:
        leg = partition.legs[tag]
        for spec, mesh, role, parent in ((leg.shoulder, leg.upper, "upper", "base"),
                                         (leg.knee, leg.lower, "lower", f"{tag}_upper")):
            child = f"{tag}_{role}"
            links[child] = _local_link(child, role, mesh, spec.origin, spec.frame, density)
            joints.append(Joint(f"{tag}_{spec.kind}", spec.kind, parent, child, spec.origin.copy(),
                                spec.frame.copy(), axis))
    model = KineticRobotModel(name, links, joints, electronics, density, source_id or name, 0,
                              {"shoulder": axis, "knee": axis})
    model.check()
    _check_core_fits(model)
    return model


def _check_core_fits(model: KineticRobotModel) -> None:
    base = model.links["base"]
    lo, hi = base.mesh.bounds()
    half = np.asarray(model.electronics.core_size) / 2
    c = base.inertial.center_of_mass
    if np.any(c - half < lo - 1e-12) or np.any(c + half > hi + 1e-12):
        raise AssemblyError("core electronics box does not fit inside the base link bounds")


def joint_spec(joint: Joint) -> JointSpec:
    return JointSpec(joint.origin, joint.frame, joint.kind, joint.axis, joint.name)
