"""Leg-length and joint-axis augmentation: 10 scales x 3 axes per source model."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import AssemblyError
from ..mesh.mass import mass_properties
from .assembly import AXES, KineticRobotModel, Link
from .urdf import export_urdf

N_SCALES = 10
SCALE_STEP = 0.005   # m of added leg length per scale index


def _stretch_below(z, anchor, factor):
    """Stretch heights below ``anchor`` by ``factor``; heights above are kept."""
    return np.where(z < anchor, anchor + (z - anchor) * factor, z)


def elongate(model: KineticRobotModel, extra: float) -> KineticRobotModel:
    """Lengthen every leg by ``extra`` meters.

    The lower leg and its knee joint drop rigidly by ``extra``; the upper leg is
    stretched vertically below the shoulder height so that it still reaches the
    knee. The foot shape is untouched and lower-link meshes stay byte-identical.
    """
    if extra == 0:
        return model
    if extra < 0:
        raise ValueError("elongation must be non-negative")
    out = copy.copy(model)
    out.links = dict(model.links)
    out.joints = [copy.copy(j) for j in model.joints]
    for shoulder in [j for j in out.joints if j.kind == "shoulder"]:
        knee = next(j for j in out.joints if j.kind == "knee" and j.parent == shoulder.child)
        zs, zk = float(shoulder.origin[2]), float(knee.origin[2])
        if zs - zk <= 0:
            raise AssemblyError(f"{knee.name}: knee is not below the shoulder")
        factor = (zs - zk + extra) / (zs - zk)

        upper = model.links[shoulder.child]
        world = upper.world_mesh()
        v = world.vertices.copy()
        v[:, 2] = _stretch_below(v[:, 2], zs, factor)
        world.vertices = v
        local = world.transformed(upper.rotation.T, -upper.rotation.T @ upper.origin)
        out.links[upper.name] = Link(upper.name, upper.role, local, upper.origin, upper.rotation,
                                     mass_properties(local, model.density))

        knee.origin = knee.origin - np.array([0.0, 0.0, extra])
        lower = model.links[knee.child]
        out.links[lower.name] = Link(lower.name, lower.role, lower.mesh, knee.origin.copy(),
                                     lower.rotation, lower.inertial)
    return out


def leg_reach(model: KineticRobotModel) -> dict:
    """Shoulder height above the lowest point of each foot, per leg tag."""
    out = {}
    for j in model.joints:
        if j.kind != "shoulder":
            continue
        tag = j.name[: -len("_shoulder")]
        foot = model.links[f"{tag}_lower"].world_mesh().bounds()[0, 2]
        out[tag] = float(j.origin[2] - foot)
    return out


def _overlaps_base(model: KineticRobotModel) -> list[str]:
    """Lower links whose bounding box reaches into the base bounding box."""
    lo, hi = model.links["base"].world_mesh().bounds()
    hits = []
    for link in model.links.values():
        if link.role != "lower":
            continue
        a, b = link.world_mesh().bounds()
        if np.all(a < hi) and np.all(b > lo):
            hits.append(link.name)
    return hits


def variant_id(source_id: str, scale_index: int, axis: str) -> str:
    return f"{source_id}-s{scale_index}-{axis}"


@dataclass
class VariantBank:
    source_id: str
    models: list
    dropped: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return len(self.models) == N_SCALES * len(AXES)

    def get(self, scale_index: int, axis: str) -> KineticRobotModel:
        for m in self.models:
            if m.leg_scale_index == scale_index and m.axes["shoulder"] == axis:
                return m
        raise KeyError((scale_index, axis))

    def manifest(self, paths: dict | None = None) -> dict:
        paths = paths or {}
        return {
            "source_id": self.source_id,
            "complete": self.complete,
            "variants": [{"id": m.name, "leg_scale_index": m.leg_scale_index,
                          "axis": m.axes["shoulder"], "total_mass": m.total_mass,
                          "urdf": paths.get(m.name)} for m in self.models],
            "dropped": self.dropped,
        }


def generate_variant_bank(model: KineticRobotModel, source_id: str | None = None,
                          n_scales: int = N_SCALES, step: float = SCALE_STEP, axes=AXES) -> VariantBank:
    """Every leg scale index times every global joint-axis label.

    Scales whose lower legs newly reach into the base are dropped and listed.
    """
    source_id = source_id or model.source_id or model.name
    models, dropped = [], []
    already = set(_overlaps_base(model))
    for i in range(n_scales):
        longer = elongate(model, i * step)
        hits = sorted(set(_overlaps_base(longer)) - already)
        if hits:
            dropped.append({"leg_scale_index": i, "reason": f"{', '.join(hits)} overlaps the base"})
            continue
        for axis in axes:
            v = longer.with_axes(axis)
            v.name = variant_id(source_id, i, axis)
            v.source_id = source_id
            v.leg_scale_index = i
            models.append(v)
    return VariantBank(source_id, models, dropped)


def export_bank(bank: VariantBank, out_dir) -> Path:
    """Write every variant URDF (sharing one content-addressed mesh folder) and a manifest."""
    out_dir = Path(out_dir)
    paths = {}
    for m in bank.models:
        paths[m.name] = export_urdf(m, out_dir).name
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps(bank.manifest(paths), indent=2))
    return manifest
