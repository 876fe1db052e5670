"""URDF export, parsing and schema validation."""
from __future__ import annotations

import hashlib
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from ..mesh.io import stl_bytes
from .assembly import KineticRobotModel, box_inertia


def _num(x) -> str:
    return repr(float(x))


def _vec(v) -> str:
    return " ".join(_num(x) for x in v)


def rpy_from_matrix(r) -> np.ndarray:
    """URDF roll-pitch-yaw: R = Rz(yaw) Ry(pitch) Rx(roll)."""
    with warnings.catch_warnings():
        # pitch of +-90 degrees is common for limb frames; any valid triple is fine
        warnings.simplefilter("ignore", UserWarning)
        return Rotation.from_matrix(np.asarray(r, float)).as_euler("xyz")


def matrix_from_rpy(rpy) -> np.ndarray:
    return Rotation.from_euler("xyz", np.asarray(rpy, float)).as_matrix()


def mesh_filename(data: bytes) -> str:
    """Content-addressed STL name, so identical geometry maps to one file."""
    return hashlib.sha256(data).hexdigest()[:20] + ".stl"


def _pose(parent, xyz, rpy=(0.0, 0.0, 0.0)):
    return ET.SubElement(parent, "origin", xyz=_vec(xyz), rpy=_vec(rpy))


def _inertial(parent, mass, com, inertia):
    el = ET.SubElement(parent, "inertial")
    _pose(el, com)
    ET.SubElement(el, "mass", value=_num(mass))
    i = np.asarray(inertia, float)
    ET.SubElement(el, "inertia", ixx=_num(i[0, 0]), ixy=_num(i[0, 1]), ixz=_num(i[0, 2]),
                  iyy=_num(i[1, 1]), iyz=_num(i[1, 2]), izz=_num(i[2, 2]))


def _geometry(parent, tag, name, xyz=(0, 0, 0), rpy=(0, 0, 0), mesh=None, box=None):
    el = ET.SubElement(parent, tag, name=name)
    _pose(el, xyz, rpy)
    geo = ET.SubElement(el, "geometry")
    if mesh is not None:
        ET.SubElement(geo, "mesh", filename=mesh)
    else:
        ET.SubElement(geo, "box", size=_vec(box))
    return el


def _relative(parent_origin, parent_rot, origin, rot):
    """Pose of a frame relative to its parent frame."""
    xyz = parent_rot.T @ (np.asarray(origin) - parent_origin)
    return xyz, parent_rot.T @ rot


def build_urdf(model: KineticRobotModel, mesh_dir: str = "meshes") -> tuple[ET.Element, dict]:
    """URDF tree plus the mesh files it references ({relative path: bytes})."""
    robot = ET.Element("robot", name=model.name)
    files = {}
    elec = model.electronics
    for link in model.links.values():
        el = ET.SubElement(robot, "link", name=link.name)
        ip = link.inertial
        _inertial(el, ip.mass, ip.center_of_mass, ip.inertia_tensor)
        data = stl_bytes(link.mesh)
        rel = f"{mesh_dir}/{mesh_filename(data)}"
        files[rel] = data
        _geometry(el, "visual", f"{link.name}_visual", mesh=rel)
        _geometry(el, "collision", f"{link.name}_collision", mesh=rel)
    # electronics ride on the parent link through fixed joints
    core = ET.SubElement(robot, "link", name="core_electronics")
    _inertial(core, elec.core_mass, (0, 0, 0), box_inertia(elec.core_size, elec.core_mass))
    _geometry(core, "visual", "core_visual", box=elec.core_size)
    _geometry(core, "collision", "core_collision", box=elec.core_size)
    base = model.links["base"]
    fixed = ET.SubElement(robot, "joint", name="core_electronics_mount", type="fixed")
    _pose(fixed, base.inertial.center_of_mass)
    ET.SubElement(fixed, "parent", link="base")
    ET.SubElement(fixed, "child", link="core_electronics")

    for joint in model.joints:
        parent = model.links[joint.parent]
        xyz, rot = _relative(parent.origin, parent.rotation, joint.origin, joint.frame)
        rpy = rpy_from_matrix(rot)
        el = ET.SubElement(robot, "joint", name=joint.name, type="revolute")
        _pose(el, xyz, rpy)
        ET.SubElement(el, "parent", link=joint.parent)
        ET.SubElement(el, "child", link=joint.child)
        ET.SubElement(el, "axis", xyz=_vec(joint.axis_local))
        ET.SubElement(el, "limit", lower=_num(-joint.limit), upper=_num(joint.limit),
                      effort=_num(joint.effort), velocity=_num(joint.velocity))

        motor = f"{joint.name}_motor"
        mel = ET.SubElement(robot, "link", name=motor)
        _inertial(mel, elec.motor_mass, (0, 0, 0), box_inertia(elec.motor_size, elec.motor_mass))
        _geometry(mel, "visual", f"{motor}_visual", box=elec.motor_size)
        _geometry(mel, "collision", f"{motor}_collision", box=elec.motor_size)
        mount = ET.SubElement(robot, "joint", name=f"{motor}_mount", type="fixed")
        _pose(mount, xyz, rpy)
        ET.SubElement(mount, "parent", link=joint.parent)
        ET.SubElement(mount, "child", link=motor)
    return robot, files


def urdf_string(model: KineticRobotModel, mesh_dir: str = "meshes") -> tuple[str, dict]:
    robot, files = build_urdf(model, mesh_dir)
    ET.indent(robot)
    text = '<?xml version="1.0"?>\n' + ET.tostring(robot, encoding="unicode") + "\n"
    return text, files


def export_urdf(model: KineticRobotModel, out_dir, mesh_dir: str = "meshes") -> Path:
    """Write ``<name>.urdf`` and its binary STL link meshes under ``out_dir``."""
    out_dir = Path(out_dir)
    text, files = urdf_string(model, mesh_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rel, data in files.items():
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.exists() or path.read_bytes() != data:
            path.write_bytes(data)
    urdf_path = out_dir / f"{model.name}.urdf"
    urdf_path.write_text(text)
    return urdf_path


# --- validation and parsing -----------------------------------------------------

def _schema():
    from lxml import etree

    with resources.files("meshbot").joinpath("data/urdf.xsd").open("rb") as fh:
        return etree.XMLSchema(etree.parse(fh))


def validate_urdf(path) -> list[str]:
    """Schema and tree errors; an empty list means the file is valid."""
    from lxml import etree

    doc = etree.parse(str(path))
    schema = _schema()
    errors = [] if schema.validate(doc) else [str(e) for e in schema.error_log]
    robot = parse_urdf(path)
    errors += robot.tree_errors()
    return errors


@dataclass
class UrdfJoint:
    name: str
    type: str
    parent: str
    child: str
    xyz: np.ndarray
    rpy: np.ndarray
    axis: np.ndarray
    limit: dict = field(default_factory=dict)


@dataclass
class UrdfLink:
    name: str
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    meshes: list = field(default_factory=list)
    boxes: list = field(default_factory=list)


@dataclass
class UrdfRobot:
    name: str
    links: dict
    joints: dict

    def root(self) -> str:
        children = {j.child for j in self.joints.values()}
        roots = [n for n in self.links if n not in children]
        return roots[0] if len(roots) == 1 else ""

    def tree_errors(self) -> list[str]:
        errs = []
        children = [j.child for j in self.joints.values()]
        if len(set(children)) != len(children):
            errs.append("a link has more than one parent joint")
        if not self.root():
            errs.append("the link graph does not have exactly one root")
        parent = {j.child: j.parent for j in self.joints.values()}
        for name in self.links:
            seen = set()
            while name in parent:
                if name in seen:
                    errs.append("the joint graph has a cycle")
                    return errs
                seen.add(name)
                name = parent[name]
        return errs

    def world_frames(self) -> dict:
        """World pose (origin, rotation) of every link frame, root at identity."""
        frames = {self.root(): (np.zeros(3), np.eye(3))}
        by_parent: dict = {}
        for j in self.joints.values():
            by_parent.setdefault(j.parent, []).append(j)
        stack = [self.root()]
        while stack:
            name = stack.pop()
            o, r = frames[name]
            for j in by_parent.get(name, []):
                frames[j.child] = (o + r @ j.xyz, r @ matrix_from_rpy(j.rpy))
                stack.append(j.child)
        return frames

    def revolute(self) -> list:
        return [j for j in self.joints.values() if j.type == "revolute"]

    def mesh_links(self) -> list:
        return [link for link in self.links.values() if link.meshes]


def _floats(text, n=3, default=None):
    if text is None:
        return np.asarray(default if default is not None else [0.0] * n, float)
    return np.asarray([float(x) for x in text.split()], float)


def parse_urdf(path) -> UrdfRobot:
    root = ET.parse(str(path)).getroot()
    links = {}
    for el in root.findall("link"):
        link = UrdfLink(el.get("name"))
        inertial = el.find("inertial")
        if inertial is not None:
            link.mass = float(inertial.find("mass").get("value"))
            origin = inertial.find("origin")
            link.com = _floats(origin.get("xyz") if origin is not None else None)
            a = inertial.find("inertia").attrib
            ixx, ixy, ixz = float(a["ixx"]), float(a["ixy"]), float(a["ixz"])
            iyy, iyz, izz = float(a["iyy"]), float(a["iyz"]), float(a["izz"])
            link.inertia = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        for col in el.findall("collision"):
            geo = col.find("geometry")
            if geo.find("mesh") is not None:
                link.meshes.append(geo.find("mesh").get("filename"))
            elif geo.find("box") is not None:
                link.boxes.append(_floats(geo.find("box").get("size")))
        links[link.name] = link
    joints = {}
    for el in root.findall("joint"):
        origin = el.find("origin")
        axis = el.find("axis")
        limit = el.find("limit")
        joints[el.get("name")] = UrdfJoint(
            el.get("name"), el.get("type"), el.find("parent").get("link"), el.find("child").get("link"),
            _floats(origin.get("xyz") if origin is not None else None),
            _floats(origin.get("rpy") if origin is not None else None),
            _floats(axis.get("xyz") if axis is not None else None, default=[1.0, 0.0, 0.0]),
            {k: float(v) for k, v in limit.attrib.items()} if limit is not None else {})
    return UrdfRobot(root.get("name"), links, joints)
