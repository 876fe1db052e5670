"""Primitive solids and composite test shapes.

Shapes with a known polyhedral form (boxes, prisms, the synthetic
quadruped) are assembled exactly. Smooth composites such as the dumbbell
are defined as signed distance fields and meshed with marching cubes,
which gives a closed manifold surface without boolean operations.
"""
from __future__ import annotations

import numpy as np
from skimage.measure import marching_cubes

from .core import TriangleMesh
from .io import weld_vertices


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    sx, sy, sz = np.asarray(size, dtype=float) / 2
    v = np.array([[-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
                  [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz]]) + np.asarray(center, float)
    t = np.array([[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7], [0, 1, 5], [0, 5, 4],
                  [1, 2, 6], [1, 6, 5], [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]])
    return TriangleMesh(v, t)


def unit_cube() -> TriangleMesh:
    """The cube [0, 1]^3."""
    return box((1, 1, 1), (0.5, 0.5, 0.5))


def icosphere(radius: float = 1.0, subdivisions: int = 2, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    p = (1 + 5 ** 0.5) / 2
    v = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
                  [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], float)
    t = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
                  [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
                  [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdivisions):
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        mid = v[uniq].mean(axis=1)
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = len(t)
        ab, bc, ca = (inv[:m] + len(v), inv[m:2 * m] + len(v), inv[2 * m:] + len(v))
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        t = np.concatenate([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
        v = np.concatenate([v, mid])
    return TriangleMesh(v * radius + np.asarray(center, float), t)


def cylinder(radius: float, height: float, sections: int = 64, center=(0.0, 0.0, 0.0),
             axis: str = "z") -> TriangleMesh:
    """Closed prism approximating a cylinder, centered on ``center`` along ``axis``."""
    ang = 2 * np.pi * np.arange(sections) / sections
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    h = height / 2
    bottom = np.column_stack([ring, np.full(sections, -h)])
    top = np.column_stack([ring, np.full(sections, h)])
    v = np.concatenate([bottom, top, [[0, 0, -h], [0, 0, h]]])
    i = np.arange(sections)
    j = (i + 1) % sections
    cb, ct = 2 * sections, 2 * sections + 1
    sides = np.concatenate([np.stack([i, j, j + sections], 1), np.stack([i, j + sections, i + sections], 1)])
    caps = np.concatenate([np.stack([np.full(sections, cb), j, i], 1),
                           np.stack([np.full(sections, ct), i + sections, j + sections], 1)])
    t = np.concatenate([sides, caps])
    perm = {"z": [0, 1, 2], "x": [2, 0, 1], "y": [1, 2, 0]}[axis]
    return TriangleMesh(v[:, perm] + np.asarray(center, float), t)


# --- signed distance fields -------------------------------------------------

def sdf_box(p, center, half):
    q = np.abs(p - np.asarray(center, float)) - np.asarray(half, float)
    outside = np.linalg.norm(np.maximum(q, 0), axis=-1)
    inside = np.minimum(q.max(axis=-1), 0)
    return outside + inside


def sdf_sphere(p, center, radius):
    return np.linalg.norm(p - np.asarray(center, float), axis=-1) - radius


def sdf_capped_cylinder(p, a, b, radius):
    """Flat-ended cylinder between points ``a`` and ``b``."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ba = b - a
    length = np.linalg.norm(ba)
    axis = ba / length
    pa = p - a
    t = pa @ axis
    radial = np.linalg.norm(pa - t[..., None] * axis, axis=-1) - radius
    along = np.abs(t - length / 2) - length / 2
    outside = np.sqrt(np.maximum(radial, 0) ** 2 + np.maximum(along, 0) ** 2)
    return outside + np.minimum(np.maximum(radial, along), 0)


def implicit_mesh(sdf, lower, upper, spacing: float) -> TriangleMesh:
    """Mesh the zero level set of ``sdf`` with marching cubes.

    The sampling grid is placed at half-integer multiples of ``spacing`` so
    that it is symmetric about the origin, and padded by two cells.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    lo = (np.floor(lower / spacing - 0.5) - 2 + 0.5) * spacing
    hi = (np.ceil(upper / spacing + 0.5) + 2 - 0.5) * spacing
    axes = [np.arange(lo[k], hi[k] + spacing / 2, spacing) for k in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = sdf(grid)
    verts, faces, _, _ = marching_cubes(values, level=0.0, spacing=(spacing,) * 3)
    verts = verts + lo
    verts, faces, _ = weld_vertices(verts, faces, 1e-12)
    mesh = TriangleMesh(verts, faces)
    if mesh.signed_volume() < 0:
        mesh = mesh.flipped()
    # drop slivers that marching cubes emits where the field touches zero at a grid node
    t = mesh.triangles
    good = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
    return TriangleMesh(mesh.vertices, t[good]).compact()


# --- exact polyhedral builders ---------------------------------------------

def _closed(vertices, faces) -> TriangleMesh:
    """Weld, fix winding and orient a hand-assembled closed surface."""
    from .repair import validate_and_repair

    mesh, _ = validate_and_repair(TriangleMesh(vertices, faces), max_hole_edges=0)
    return mesh


def _earcut(points2d, rings_end) -> np.ndarray:
    import mapbox_earcut

    return mapbox_earcut.triangulate_float64(np.asarray(points2d, float),
                                             np.asarray(rings_end, dtype=np.uint32)).reshape(-1, 3)


def extrude_polygon(polygon, height: float, z0: float = 0.0) -> TriangleMesh:
    """Extrude a simple 2D polygon (x, y) along +z."""
    poly = np.asarray(polygon, float)
    n = len(poly)
    cap = _earcut(poly, [n])
    bottom = np.column_stack([poly, np.full(n, z0)])
    top = np.column_stack([poly, np.full(n, z0 + height)])
    i = np.arange(n)
    j = (i + 1) % n
    faces = np.concatenate([cap[:, ::-1], cap + n, np.stack([i, j, j + n], 1), np.stack([i, j + n, i + n], 1)])
    return _closed(np.concatenate([bottom, top]), faces)


QUADRUPED = {
    "body_half": (0.06, 0.15, 0.04),
    "body_center": (0.0, 0.0, 0.12),
    "leg_radius": 0.02,
    "leg_x": 0.035,
    "column_y": 0.25,
    "sections": 32,
    "tail_radius": 0.0,
    "tail_length": 0.07,
    "tail_z": 0.145,
}


def synthetic_quadruped(params=QUADRUPED, missing_legs=()) -> TriangleMesh:
    """Box body with four L-shaped cylindrical legs, grounded at z = 0.

    Each leg is a tube of circular section that leaves a body end face
    along +/-y at mid body height (the thigh), bends through a mitered
    elbow and drops vertically to the ground (the column). The body-leg
    neck is the body end face at |y| = body_half[1].

    ``missing_legs`` indexes legs in the order front-right, front-left,
    rear-right, rear-left (front is +y, right is +x). A positive
    ``tail_radius`` adds a straight tube leaving the rear face at x = 0.
    """
    params = {**QUADRUPED, **params}
    hx, hy, hz = params["body_half"]
    cx, cy, cz = params["body_center"]
    r, n = params["leg_radius"], params["sections"]
    ang = 2 * np.pi * np.arange(n) / n
    cos, sin = np.cos(ang), np.sin(ang)
    verts: list = []
    faces: list = []

    def add(points):
        base = sum(len(v) for v in verts)
        verts.append(np.asarray(points, float))
        return base + np.arange(len(points))

    def quads(a, b):
        j = np.roll(np.arange(len(a)), -1)
        faces.append(np.stack([a, a[j], b[j]], 1))
        faces.append(np.stack([a, b[j], b], 1))

    end_rings = {1: [], -1: []}
    legs = [(sx, sy) for sy in (1, -1) for sx in (1, -1)]
    for k, (sx, sy) in enumerate(legs):
        if k in missing_legs:
            continue
        x0 = cx + sx * params["leg_x"]
        yc = cy + sy * params["column_y"]
        root = add(np.column_stack([x0 + r * cos, np.full(n, cy + sy * hy), cz + r * sin]))
        # miter plane of the bend from +/-y to -z: (y - yc) * sy = z - cz
        elbow = add(np.column_stack([x0 + r * cos, yc + sy * r * sin, cz + r * sin]))
        foot = add(np.column_stack([x0 + r * cos, yc + sy * r * sin, np.zeros(n)]))
        quads(root, elbow)
        quads(elbow, foot)
        faces.append(np.stack([np.full(n - 2, foot[0]), foot[1:-1], foot[2:]], 1))
        end_rings[sy].append(root)
    if params["tail_radius"] > 0:
        rt, zt = params["tail_radius"], params["tail_z"]
        root = add(np.column_stack([cx + rt * cos, np.full(n, cy - hy), zt + rt * sin]))
        tip = add(np.column_stack([cx + rt * cos, np.full(n, cy - hy - params["tail_length"]), zt + rt * sin]))
        quads(root, tip)
        faces.append(np.stack([np.full(n - 2, tip[0]), tip[1:-1], tip[2:]], 1))
        end_rings[-1].append(root)

    corners = np.array([[sx, sy, sz] for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)], float)
    box_ids = add(corners * (hx, hy, hz) + (cx, cy, cz))
    b = lambda sx, sy, sz: box_ids[((sz + 1) // 2) * 4 + ((sy + 1) // 2) * 2 + (sx + 1) // 2]
    for sz in (-1, 1):
        faces.append(np.array([[b(-1, -1, sz), b(1, -1, sz), b(1, 1, sz)], [b(-1, -1, sz), b(1, 1, sz), b(-1, 1, sz)]]))
    for sx in (-1, 1):
        faces.append(np.array([[b(sx, -1, -1), b(sx, 1, -1), b(sx, 1, 1)], [b(sx, -1, -1), b(sx, 1, 1), b(sx, -1, 1)]]))
    all_v = lambda: np.concatenate(verts)
    for sy in (-1, 1):
        outer = [b(-1, sy, -1), b(1, sy, -1), b(1, sy, 1), b(-1, sy, 1)]
        rings = [np.array(outer)] + end_rings[sy]
        ids = np.concatenate(rings)
        pts = all_v()[ids][:, [0, 2]]
        ends = np.cumsum([len(x) for x in rings])
        faces.append(ids[_earcut(pts, ends)])
    return _closed(all_v(), np.concatenate(faces))


def leg_prism(length: float = 0.10, radius: float = 0.02, sections: int = 32, axis: str = "y",
              start: float = 0.0) -> TriangleMesh:
    """Cylinder along ``axis`` from ``start`` to ``start + length``."""
    center = [0.0, 0.0, 0.0]
    center["xyz".index(axis)] = start + length / 2
    return cylinder(radius, length, sections, center, axis)


def dumbbell(radius: float = 0.05, neck_radius: float = 0.01, separation: float = 0.16,
             spacing: float = 0.002) -> TriangleMesh:
    """Two spheres on the y axis joined by a thin cylinder; the neck is at y = 0."""
    c = separation / 2

    def sdf(p):
        s = np.minimum(sdf_sphere(p, (0, -c, 0), radius), sdf_sphere(p, (0, c, 0), radius))
        return np.minimum(s, sdf_capped_cylinder(p, (0, -c, 0), (0, c, 0), neck_radius))

    ext = c + radius
    return implicit_mesh(sdf, (-radius, -ext, -radius), (radius, ext, radius), spacing)


def bulged_leg(radius: float = 0.015, height: float = 0.12, bulge_radius: float = 0.025,
               bulge_z: float = 0.07, spacing: float = 0.002) -> TriangleMesh:
    """Vertical cylinder from z = 0 to ``height`` with a sphere fused at ``bulge_z``."""
    def sdf(p):
        col = sdf_capped_cylinder(p, (0, 0, 0), (0, 0, height), radius)
        return np.minimum(col, sdf_sphere(p, (0, 0, bulge_z), bulge_radius))

    e = max(radius, bulge_radius)
    return implicit_mesh(sdf, (-e, -e, 0), (e, e, height), spacing)


def voxel_solid(occupied, size: float = 1.0, origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed surface of a union of axis-aligned cubes.

    ``occupied`` is a boolean 3D array; cells sharing only an edge or a
    corner would make the surface non-manifold and are not supported.
    """
    occ = np.pad(np.asarray(occupied, bool), 1)
    quads = []
    # unit-cube face corners for each axis, ordered CCW seen from +axis
    face = {0: [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
            1: [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
            2: [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]}
    for ax in range(3):
        diff = occ.astype(np.int8) - np.roll(occ, -1, axis=ax).astype(np.int8)
        corners = np.asarray(face[ax], float)
        for sign in (1, -1):
            cells = np.argwhere(diff == sign)
            for c in cells:
                q = c + corners - 1
                quads.append(q if sign == 1 else q[::-1])
    q = np.asarray(quads) * size + np.asarray(origin, float)
    v = q.reshape(-1, 3)
    base = 4 * np.arange(len(q))[:, None]
    t = np.concatenate([base + [0, 1, 2], base + [0, 2, 3]])
    return _closed(v, t)


def l_shape(size: float = 1.0) -> TriangleMesh:
    """Three unit blocks branching from a corner block along +x, +y and +z.

    No axis-aligned plane maps this solid onto itself.
    """
    occ = np.zeros((2, 2, 2), bool)
    occ[0, 0, 0] = occ[1, 0, 0] = occ[0, 1, 0] = occ[0, 0, 1] = True
    return voxel_solid(occ, size)
