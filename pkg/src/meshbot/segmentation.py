"""Joint allocation on a quadruped mesh.

The mesh is sliced along its longitudinal axis; the local minimum of the
cross-section area closest to the center of mass marks where the legs leave
the body. The plane through it and its mirror image split off four legs,
each leg is cut once more at the horizontal slice of largest area (the knee),
and finally every limb is trimmed to leave room for a servo at its proximal
joint.

Conventions: +z is up, +y is the facing direction, +x is the robot's right.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyResultError, SegmentationError
from .mesh.core import CrossSection, Plane, TriangleMesh
from .mesh.mass import mass_properties
from .mesh.repair import face_components
from .mesh.slicing import cross_section, plane_cut, split_by_plane, triangulate_loops

SLICE_STEP = 0.002
KNEE_MARGIN = 0.02
LIMB_OFFSET = 0.04
TIE_RTOL = 1e-6
LEG_TAGS = ("front_left", "front_right", "rear_left", "rear_right")
FACING = np.array([0.0, 1.0, 0.0])
UP = np.array([0.0, 0.0, 1.0])


@dataclass
class JointSpec:
    """Joint origin and frame in world coordinates.

    ``frame`` holds the unit x, y and z axes as its columns.
    """

    origin: np.ndarray
    frame: np.ndarray
    kind: str
    rotation_axis: str = "x"
    name: str = ""

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.frame = np.asarray(self.frame, dtype=float)

    @property
    def axis_vector(self) -> np.ndarray:
        return self.frame[:, "xyz".index(self.rotation_axis)]

    def check(self, tol: float = 1e-9) -> None:
        f = self.frame
        if np.abs(f.T @ f - np.eye(3)).max() > tol:
            raise SegmentationError(f"{self.name}: joint frame is not orthonormal")
        if np.abs(np.cross(f[:, 0], f[:, 1]) - f[:, 2]).max() > tol:
            raise SegmentationError(f"{self.name}: joint frame is not right-handed")

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "origin": self.origin.tolist(),
                "frame": self.frame.tolist(), "rotation_axis": self.rotation_axis}

    @classmethod
    def from_dict(cls, d: dict) -> "JointSpec":
        return cls(np.asarray(d["origin"]), np.asarray(d["frame"]), d["kind"], d["rotation_axis"], d["name"])


def frame_from_axes(y, z) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


@dataclass
class LegSegment:
    tag: str
    upper: TriangleMesh
    lower: TriangleMesh
    shoulder: JointSpec
    knee: JointSpec


@dataclass
class BodyPartition:
    base_link: TriangleMesh
    legs: dict
    separation_planes: tuple
    report: dict = field(default_factory=dict)

    def check(self) -> None:
        if sorted(self.legs) != sorted(LEG_TAGS):
            raise SegmentationError(f"expected legs {LEG_TAGS}, got {sorted(self.legs)}")
        for leg in self.legs.values():
            leg.shoulder.check()
            leg.knee.check()
            if not leg.knee.origin[2] < leg.shoulder.origin[2]:
                raise SegmentationError(f"{leg.tag}: knee is not below the shoulder")

    def meshes(self) -> dict:
        out = {"base": self.base_link}
        for tag in LEG_TAGS:
            out[f"{tag}_upper"] = self.legs[tag].upper
            out[f"{tag}_lower"] = self.legs[tag].lower
        return out


# --- orientation ---------------------------------------------------------

@dataclass
class CanonicalFrame:
    """``canonical = rotation @ original + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def canonicalize(mesh: TriangleMesh) -> tuple[TriangleMesh, CanonicalFrame]:
    """Turn the horizontal footprint's long axis onto +/-y, center the COM
    over the origin and put the lowest point on z = 0.

    The mesh is assumed to be upright already. Of the two rotations that
    align the long axis, the smaller one is used.
    """
    mp = mass_properties(mesh)
    # horizontal second moment about the COM, recovered from the inertia tensor
    cov = np.trace(mp.inertia_tensor) / 2 * np.eye(3) - mp.inertia_tensor
    w, vecs = np.linalg.eigh(cov[:2, :2])
    rot = np.eye(3)
    if w[1] - w[0] > 1e-9 * max(abs(w[1]), 1e-300):
        ex, ey = vecs[:, 1]
        theta = np.arctan2(ex, ey)  # angle taking the long axis onto +y
        if theta > np.pi / 2:
            theta -= np.pi
        elif theta <= -np.pi / 2:
            theta += np.pi
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        if abs(theta) < 1e-12:
            rot = np.eye(3)
    com = rot @ mp.center_of_mass
    v = mesh.vertices @ rot.T
    shift = np.array([-com[0], -com[1], -v[:, 2].min()])
    return TriangleMesh(v + shift, mesh.triangles.copy(), mesh.units_scale), CanonicalFrame(rot, shift)


# --- separation planes ---------------------------------------------------

def _plateau_minima(values: np.ndarray, rtol: float = TIE_RTOL) -> list[int]:
    """Indices of strict local minima; a flat run counts once, at each end's inner side.

    Each run of (nearly) equal values bounded on both sides by larger
    values is returned as the pair (first, last) of its indices.
    """
    n = len(values)
    runs = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(values[j + 1] - values[i]) <= rtol * max(abs(values[i]), 1e-300):
            j += 1
        runs.append((i, j))
        i = j + 1
    out = []
    for i, j in runs:
        if i == 0 or j == n - 1:
            continue
        if values[i - 1] > values[i] and values[j + 1] > values[i] and values[i] > 0:
            out.append((i, j))
    return out


@dataclass
class PlaneSearch:
    coords: np.ndarray
    areas: np.ndarray
    loop_counts: list
    chosen: int
    center: np.ndarray

    def to_dict(self) -> dict:
        return {"coords": self.coords.tolist(), "areas": self.areas.tolist(),
                "loop_counts": self.loop_counts, "chosen_index": self.chosen,
                "center": self.center.tolist()}


def find_separation_planes(mesh: TriangleMesh, step: float = SLICE_STEP, center=None,
                           return_search: bool = False):
    """Front and rear separation planes, mirror images about the COM.

    Slices parallel to the xz plane are taken every ``step`` along y,
    outwards from the COM in both directions. Of all strict local minima of
    the area profile (a flat run counts as one minimum, located at its end
    nearest the COM), the one closest to the COM wins; ties go to +y. The
    front plane's normal is +y and the rear plane's is -y, both pointing
    away from the body.
    """
    if center is None:
        center = mass_properties(mesh).center_of_mass
    center = np.asarray(center, dtype=float)
    lo, hi = mesh.bounds()[:, 1] - center[1]
    reach = max(abs(lo), abs(hi)) + step
    k = int(np.ceil(reach / step))
    coords = np.arange(-k, k + 1) * step
    origin = np.array([0.0, center[1], 0.0])
    # each slice faces away from the COM, so both halves treat on-plane
    # vertices the same way and the profile stays mirror symmetric
    sections = [cross_section(mesh, Plane(origin + s * FACING, FACING if s >= 0 else -FACING))
                for s in coords]
    areas = np.array([sec.total_area for sec in sections])
    best = None
    for i, j in _plateau_minima(areas):
        # the end of the run nearest the COM; a run spanning the COM is no neck
        if coords[i] <= 0 <= coords[j]:
            continue
        idx = i if coords[i] > 0 else j
        key = (abs(coords[idx]), 0 if coords[idx] > 0 else 1)
        if best is None or key < best[0]:
            best = (key, idx)
    if best is None:
        raise SegmentationError("no local minimum in the longitudinal area profile")
    idx = best[1]
    dist = abs(coords[idx])
    if dist < step / 2:
        raise SegmentationError("area minimum sits at the center of mass")
    front = Plane(origin + dist * FACING, FACING)
    rear = Plane(origin - dist * FACING, -FACING)
    search = PlaneSearch(coords + center[1], areas, [sec.n_loops for sec in sections], int(idx), center)
    if return_search:
        return (front, rear), search
    return front, rear


# --- shoulders -------------------------------------------------------------

def _two_largest(section: CrossSection) -> list[int]:
    order = sorted(range(section.n_loops), key=lambda i: (-section.loop_areas[i], i))
    return [i for i in order if section.loop_areas[i] > 0][:2]


def _side_tags(plane: Plane, xs) -> list[str]:
    end = "front" if plane.normal[1] > 0 else "rear"
    # tie on x: keep the loop order, first one to the right
    right = int(np.argmax(xs)) if xs[0] != xs[1] else 0
    return [f"{end}_right" if i == right else f"{end}_left" for i in range(2)]


def shoulder_frame(normal) -> np.ndarray:
    return frame_from_axes(-UP, np.asarray(normal, dtype=float))


def place_shoulder_joints(mesh: TriangleMesh, planes, report: dict | None = None) -> dict:
    """Shoulder joints at the centroids of the two largest loops of each plane section."""
    joints = {}
    for plane in planes:
        sec = cross_section(mesh, plane)
        picks = _two_largest(sec)
        if len(picks) < 2:
            raise SegmentationError(f"plane at y={plane.point[1]:.4f} cuts fewer than two legs")
        origins = [sec.loop_centroid_world(i) for i in picks]
        tags = _side_tags(plane, [o[0] for o in origins])
        for tag, origin in zip(tags, origins):
            joints[tag] = JointSpec(origin, shoulder_frame(plane.normal), "shoulder", "x", f"{tag}_shoulder")
        if report is not None:
            report.setdefault("shoulder_sections", []).append({
                "plane": plane.to_dict(), "loop_areas": list(map(float, sec.loop_areas)),
                "chosen_loops": picks, "extra_loops": sec.n_loops - len(picks)})
    return joints


# --- partition -------------------------------------------------------------

def _split_off(mesh: TriangleMesh, plane: Plane, n_legs: int = 2):
    """Separate the geometry beyond ``plane`` into leg pieces and a remainder.

    Returns (rest, legs) where ``rest`` keeps the inner side plus any
    beyond-plane component that does not carry one of the ``n_legs``
    largest section loops, and ``legs`` lists (closed leg mesh, point on its
    section) pairs.
    """
    sp = split_by_plane(mesh, plane)
    verts = sp.vertices
    loops = sp.loops
    u, v = plane.basis()
    areas = []
    for ring in loops:
        p = verts[ring] - plane.point
        x, y = p @ u, p @ v
        areas.append(0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))
    leg_loops = sorted(range(len(loops)), key=lambda i: (-areas[i], i))
    leg_loops = [i for i in leg_loops if areas[i] > 0][:n_legs]
    if len(leg_loops) < n_legs:
        raise SegmentationError("separation plane does not cut the expected number of legs")

    outer = TriangleMesh(verts, sp.positive)
    n_comp, labels = face_components(outer) if len(sp.positive) else (0, np.zeros(0, int))
    # which beyond-plane component owns each loop
    vert_comp = np.full(len(verts), -1)
    for c in range(n_comp):
        vert_comp[np.unique(sp.positive[labels == c])] = c
    loop_comp = [int(vert_comp[ring[0]]) for ring in loops]
    leg_comps = sorted({loop_comp[i] for i in leg_loops})

    rest_tris = [sp.negative]
    for c in range(n_comp):
        if c not in leg_comps:
            rest_tris.append(sp.positive[labels == c])
    # close the inner side over the leg loops (and holes lying inside them)
    cap_loops = [loops[i] for i in range(len(loops)) if loop_comp[i] in leg_comps]
    cap, extra = triangulate_loops(verts, cap_loops, plane)
    rest = TriangleMesh(np.concatenate([verts, extra]), np.concatenate(rest_tris + [cap])).compact()

    anchor = {i: verts[loops[i]].mean(axis=0) for i in leg_loops}
    legs = []
    for c in leg_comps:
        tris = sp.positive[labels == c]
        mine = [loops[i] for i in range(len(loops)) if loop_comp[i] == c]
        leg_cap, extra = triangulate_loops(verts, mine, plane)
        mesh_c = TriangleMesh(np.concatenate([verts, extra]), np.concatenate([tris, leg_cap[:, ::-1]])).compact()
        legs.append((mesh_c, anchor[[i for i in leg_loops if loop_comp[i] == c][0]]))
    if len(legs) == 1 and n_legs == 2:
        # webbed legs: one component, split it between the two leg loops
        a, b = anchor[leg_loops[0]], anchor[leg_loops[1]]
        side = a - b
        side -= (side @ plane.normal) * plane.normal
        if np.linalg.norm(side) == 0:
            raise SegmentationError("cannot separate legs sharing one component")
        splitter = Plane(0.5 * (a + b), side)
        try:
            legs = [(plane_cut(legs[0][0], splitter, "positive"), a),
                    (plane_cut(legs[0][0], splitter, "negative"), b)]
        except EmptyResultError as exc:
            raise SegmentationError("cannot separate legs sharing one component") from exc
    return rest, legs


def partition_body(mesh: TriangleMesh, planes, shoulders: dict, report: dict | None = None):
    """Base link plus four closed leg meshes keyed by tag."""
    rest = mesh
    leg_meshes = {}
    for plane in planes:
        rest, legs = _split_off(rest, plane)
        end = "front" if plane.normal[1] > 0 else "rear"
        cands = [t for t in shoulders if t.startswith(end)]
        for leg, anchor in legs:
            # the shoulder nearest the leg's section on the plane
            tag = min(cands, key=lambda t: (np.linalg.norm(shoulders[t].origin - anchor), t))
            if tag in leg_meshes:
                raise SegmentationError(f"two leg pieces claim {tag}")
            leg_meshes[tag] = leg
    return rest, leg_meshes


# --- knees -----------------------------------------------------------------

def knee_frame() -> np.ndarray:
    return frame_from_axes(np.cross(UP, FACING), UP)


def place_knee_joint(leg: TriangleMesh, top_z: float, step: float = SLICE_STEP,
                     margin: float = KNEE_MARGIN, name: str = "knee", report: dict | None = None) -> JointSpec:
    """Knee at the centroid of the largest horizontal section of ``leg``.

    Slices run downward from ``top_z`` to ``margin`` above the leg's lowest
    point; equal areas resolve to the highest slice.
    """
    bottom = leg.bounds()[0, 2] + margin
    if top_z < bottom:
        raise SegmentationError(f"{name}: leg too short for a knee {margin} m above the ground")
    n = int(np.floor((top_z - bottom) / step + 1e-9))
    zs = top_z - step * np.arange(n + 1)
    secs = [cross_section(leg, Plane((0.0, 0.0, z), UP)) for z in zs]
    areas = np.array([s.total_area for s in secs])
    if areas.max() <= 0:
        raise SegmentationError(f"{name}: no leg material in the knee search range")
    best = int(np.flatnonzero(areas >= areas.max() * (1 - TIE_RTOL))[0])
    origin = secs[best].centroid()
    if report is not None:
        report[name] = {"z": zs.tolist(), "areas": areas.tolist(), "chosen_index": best}
    return JointSpec(origin, knee_frame(), "knee", "x", name)


def place_knee_joints(base_link: TriangleMesh, legs: dict, step: float = SLICE_STEP,
                      margin: float = KNEE_MARGIN, report: dict | None = None) -> dict:
    top = base_link.bounds()[0, 2]
    return {tag: place_knee_joint(legs[tag], top, step, margin, f"{tag}_knee", report)
            for tag in sorted(legs)}


def _split_at_knee(leg: TriangleMesh, knee: JointSpec):
    plane = Plane(knee.origin, UP)
    try:
        return plane_cut(leg, plane, "positive"), plane_cut(leg, plane, "negative")
    except EmptyResultError as exc:
        raise SegmentationError(f"{knee.name}: knee plane does not split the leg") from exc


# --- trimming ----------------------------------------------------------------

def trim_limb(mesh: TriangleMesh, joint: JointSpec, offset: float, normal, name: str) -> TriangleMesh:
    """Remove a slab of thickness ``offset`` next to ``joint`` on the limb side.

    ``normal`` points from the joint into the limb.
    """
    if offset == 0:
        return mesh
    if offset < 0:
        raise ValueError("offset must be non-negative")
    n = np.asarray(normal, dtype=float)
    plane = Plane(joint.origin + offset * n / np.linalg.norm(n), n)
    try:
        return plane_cut(mesh, plane, "positive")
    except EmptyResultError as exc:
        raise SegmentationError(f"{name}: trimming {offset} m removes the whole limb") from exc


def split_and_offset_limbs(partition: BodyPartition, offset: float = LIMB_OFFSET) -> BodyPartition:
    """Trim each limb by ``offset`` at its proximal joint to leave room for the servo.

    Upper legs lose a slab beyond the shoulder plane, lower legs a slab below
    the knee plane. Joint origins are unchanged.
    """
    legs = {}
    for tag, leg in partition.legs.items():
        upper = trim_limb(leg.upper, leg.shoulder, offset, leg.shoulder.frame[:, 2], f"{tag}_upper")
        lower = trim_limb(leg.lower, leg.knee, offset, -UP, f"{tag}_lower")
        legs[tag] = LegSegment(tag, upper, lower, leg.shoulder, leg.knee)
    report = dict(partition.report)
    report["limb_offset"] = offset
    return BodyPartition(partition.base_link, legs, partition.separation_planes, report)


# --- pipeline --------------------------------------------------------------------

def segment(mesh: TriangleMesh, step: float = SLICE_STEP, offset: float = LIMB_OFFSET,
            margin: float = KNEE_MARGIN) -> BodyPartition:
    """Partition a canonical mesh into a base link and four two-part legs."""
    report: dict = {"slice_step": step}
    whole = mass_properties(mesh)
    planes, search = find_separation_planes(mesh, step, whole.center_of_mass, return_search=True)
    report["plane_search"] = search.to_dict()
    report["planes"] = [p.to_dict() for p in planes]
    shoulders = place_shoulder_joints(mesh, planes, report)
    base, leg_meshes = partition_body(mesh, planes, shoulders, report)
    if len(leg_meshes) != 4:
        raise SegmentationError(f"found {len(leg_meshes)} legs, expected 4")
    knee_report: dict = {}
    knees = place_knee_joints(base, leg_meshes, step, margin, knee_report)
    report["knee_search"] = knee_report
    legs = {}
    for tag in LEG_TAGS:
        upper, lower = _split_at_knee(leg_meshes[tag], knees[tag])
        legs[tag] = LegSegment(tag, upper, lower, shoulders[tag], knees[tag])
    parts = BodyPartition(base, legs, planes, report)
    parts.check()
    volumes = {k: mass_properties(m).volume for k, m in parts.meshes().items()}
    report["volumes"] = {"whole": whole.volume, "parts": volumes,
                         "relative_error": abs(sum(volumes.values()) - whole.volume) / whole.volume}
    if report["volumes"]["relative_error"] > 0.01:
        raise SegmentationError("part volumes do not add up to the whole")
    return split_and_offset_limbs(parts, offset) if offset else parts


def report_json(partition: BodyPartition) -> str:
    joints = {}
    for tag, leg in partition.legs.items():
        joints[leg.shoulder.name] = leg.shoulder.to_dict()
        joints[leg.knee.name] = leg.knee.to_dict()
    return json.dumps({**partition.report, "joints": joints}, indent=2, sort_keys=True)
