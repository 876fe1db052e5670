"""JSON form of a kinetic model, with link meshes kept in content-addressed .npz files.

STL stores float32, so it is only used for export; the stored model keeps
full precision so a reloaded model reproduces masses bit for bit.
"""
from __future__ import annotations

import hashlib
import io
import json
from pathlib import Path

import numpy as np

from ..mesh.core import MassProperties, TriangleMesh
from .assembly import ElectronicsSpec, Joint, KineticRobotModel, Link


def mesh_blob(mesh: TriangleMesh) -> bytes:
    buf = io.BytesIO()
    np.savez(buf, vertices=mesh.vertices, triangles=mesh.triangles)
    return buf.getvalue()


def mesh_key(mesh: TriangleMesh) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(mesh.triangles, dtype="<i8").tobytes())
    return h.hexdigest()[:20]


def write_mesh(mesh: TriangleMesh, directory) -> str:
    """Store ``mesh`` once under ``directory``; returns the file name."""
    directory = Path(directory)
    name = mesh_key(mesh) + ".npz"
    path = directory / name
    if not path.exists():
        directory.mkdir(parents=True, exist_ok=True)
        path.write_bytes(mesh_blob(mesh))
    return name


def read_mesh(path) -> TriangleMesh:
    with np.load(path) as data:
        return TriangleMesh(data["vertices"], data["triangles"])


def model_to_dict(model: KineticRobotModel, mesh_dir, rel: str = "meshes") -> dict:
    links = {}
    for link in model.links.values():
        links[link.name] = {
            "role": link.role,
            "mesh": f"{rel}/{write_mesh(link.mesh, mesh_dir)}",
            "origin": link.origin.tolist(),
            "rotation": link.rotation.tolist(),
            "inertial": link.inertial.to_dict(),
        }
    joints = [{"name": j.name, "kind": j.kind, "parent": j.parent, "child": j.child,
               "origin": j.origin.tolist(), "frame": j.frame.tolist(), "axis": j.axis,
               "limit": j.limit, "velocity": j.velocity, "effort": j.effort} for j in model.joints]
    return {"name": model.name, "source_id": model.source_id, "leg_scale_index": model.leg_scale_index,
            "axes": model.axes, "density": model.density, "electronics": model.electronics.to_dict(),
            "links": links, "joints": joints}


def model_from_dict(d: dict, root) -> KineticRobotModel:
    root = Path(root)
    links = {}
    for name, ld in d["links"].items():
        links[name] = Link(name, ld["role"], read_mesh(root / ld["mesh"]), np.asarray(ld["origin"]),
                           np.asarray(ld["rotation"]), MassProperties.from_dict(ld["inertial"]))
    joints = [Joint(j["name"], j["kind"], j["parent"], j["child"], np.asarray(j["origin"]),
                    np.asarray(j["frame"]), j["axis"], j["limit"], j["velocity"], j["effort"])
              for j in d["joints"]]
    return KineticRobotModel(d["name"], links, joints, ElectronicsSpec.from_dict(d["electronics"]),
                             d["density"], d["source_id"], d["leg_scale_index"], dict(d["axes"]))


def save_model(model: KineticRobotModel, path) -> Path:
    """Write ``path`` (JSON) with meshes beside it in ``meshes/``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = model_to_dict(model, path.parent / "meshes")
    path.write_text(json.dumps(d, indent=1))
    return path


def load_model(path) -> KineticRobotModel:
    path = Path(path)
    return model_from_dict(json.loads(path.read_text()), path.parent)
