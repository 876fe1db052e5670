"""Plane sections, area profiles and capped plane cuts.

Vertices lying exactly on a plane are treated as being on its positive
side (symbolic perturbation). Every intersection point then lies on an
edge with one strictly negative endpoint, which makes section loops and
cut boundaries well defined on closed meshes.
"""
from __future__ import annotations

from dataclasses import dataclass

import mapbox_earcut
import numpy as np

from ..errors import EmptyResultError
from .core import CrossSection, Plane, TriangleMesh
from .mass import volume_moments

_EDGES = ((0, 1), (1, 2), (2, 0))
SNAP_TOLERANCE = 1e-10  # relative to the mesh extent about the plane point


@dataclass
class PlaneSplit:
    """Open halves of a mesh split by a plane, sharing cut vertices."""

    vertices: np.ndarray          # original vertices followed by cut vertices
    negative: np.ndarray          # triangles on the negative side
    positive: np.ndarray          # triangles on the positive side
    loops: list                   # closed loops of vertex indices, oriented CCW about the plane normal
    plane: Plane


def _cut_points(mesh: TriangleMesh, plane: Plane):
    """Intersection segments of the mesh with the plane.

    Returns per-crossing-triangle data: triangle index, the two cut keys and
    their 3D points, with segments oriented so the solid lies to the left
    when viewed against the plane normal.
    """
    d = plane.signed_distance(mesh.vertices)
    if len(d):
        # snap vertices within rounding noise of the plane onto it, so no cut
        # point lands a hair away from an existing vertex
        scale = float(np.abs(mesh.vertices - plane.point).max())
        d[np.abs(d) <= SNAP_TOLERANCE * scale] = 0.0
    neg = d < 0
    t = mesh.triangles
    tn = neg[t]
    cnt = tn.sum(axis=1)
    crossing = np.nonzero((cnt == 1) | (cnt == 2))[0]
    if len(crossing) == 0:
        return d, crossing, np.zeros((0, 2), dtype=object), np.zeros((0, 2, 3))
    nv = mesh.n_vertices
    tc = t[crossing]
    negc = tn[crossing]
    keys = np.zeros((len(crossing), 2), dtype=np.int64)
    pts = np.zeros((len(crossing), 2, 3))
    for a, b in _EDGES:
        va, vb = tc[:, a], tc[:, b]
        cross = negc[:, a] != negc[:, b]
        if not cross.any():
            continue
        ia, ib = va[cross], vb[cross]
        na = negc[cross, a]
        # order each edge as (negative endpoint, non-negative endpoint)
        lo = np.where(na, ia, ib)
        hi = np.where(na, ib, ia)
        dl, dh = d[lo], d[hi]
        s = dl / (dl - dh)
        p = mesh.vertices[lo] + s[:, None] * (mesh.vertices[hi] - mesh.vertices[lo])
        on_plane = dh == 0.0
        p[on_plane] = mesh.vertices[hi[on_plane]]
        # keys: a cut on edge (lo, hi) unless hi sits on the plane, then the vertex itself
        k = np.where(on_plane, hi, nv + lo * nv + hi)
        rows = np.nonzero(cross)[0]
        # orientation is decided combinatorially so that near-zero segments
        # cannot flip it: the segment runs from the cut on the edge leaving
        # the positive side to the cut on the edge entering it, which points
        # along n x N for outward normals N
        slot = na.astype(np.int64)
        keys[rows, slot] = k
        pts[rows, slot] = p
    return d, crossing, keys, pts


def _chain(keys: np.ndarray) -> list[list[int]]:
    """Chain directed segments (start key -> end key) into closed loops of segment indices."""
    out: dict[int, list[int]] = {}
    for i, (a, b) in enumerate(keys.tolist()):
        if a == b:
            continue
        out.setdefault(a, []).append(i)
    loops = []
    used = set()
    for start_seg in range(len(keys)):
        if start_seg in used or keys[start_seg, 0] == keys[start_seg, 1]:
            continue
        loop = []
        seg = start_seg
        start_key = keys[seg, 0]
        while True:
            used.add(seg)
            loop.append(seg)
            end = keys[seg, 1]
            if end == start_key:
                break
            nxt = [s for s in out.get(end, []) if s not in used]
            if not nxt:
                break  # open chain; only possible on non-closed input
            seg = nxt[0]
        loops.append(loop)
    return loops


def _polygon_area_centroid(p: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    if a == 0:
        return 0.0, p.mean(axis=0)
    cx = ((x + xn) * cr).sum() / (6 * a)
    cy = ((y + yn) * cr).sum() / (6 * a)
    return float(a), np.array([cx, cy])


def cross_section(mesh: TriangleMesh, plane: Plane) -> CrossSection:
    """Closed intersection loops of ``plane`` with a closed mesh."""
    _, crossing, keys, pts = _cut_points(mesh, plane)
    if len(crossing) == 0:
        return CrossSection(plane, [], [], [], 0.0, [])
    u, v = plane.basis()
    rel = pts[:, 0] - plane.point
    p2 = np.stack([rel @ u, rel @ v], axis=1)
    loops, areas, cents, loop_keys = [], [], [], []
    for segs in _chain(keys):
        ring = p2[segs]
        if len(ring) < 3:
            continue
        a, c = _polygon_area_centroid(ring)
        loops.append(ring)
        areas.append(a)
        cents.append(c)
        loop_keys.append(keys[segs, 0])
    return CrossSection(plane, loops, areas, cents, float(sum(areas)), loop_keys)


def area_profile(mesh: TriangleMesh, axis, start: float, stop: float, step: float,
                 origin=None) -> list[tuple[float, CrossSection]]:
    """Cross sections at ``start, start + step, ...`` up to and including ``stop``.

    Coordinates are measured along ``axis`` from ``origin`` (default the world origin).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if start > stop:
        raise ValueError("start must not exceed stop")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    n = int(np.floor((stop - start) / step + 1e-9))
    coords = [start + i * step for i in range(n + 1)]
    if stop - coords[-1] > 1e-12 * max(1.0, abs(stop)):
        coords.append(stop)
    return [(s, cross_section(mesh, Plane(origin + s * axis, axis))) for s in coords]


def split_by_plane(mesh: TriangleMesh, plane: Plane) -> PlaneSplit:
    """Split triangles along the plane without capping either side."""
    d, crossing, keys, pts = _cut_points(mesh, plane)
    nv = mesh.n_vertices
    neg = d < 0
    t = mesh.triangles
    cnt = neg[t].sum(axis=1)
    neg_tris = [t[cnt == 3]]
    pos_tris = [t[cnt == 0]]

    key_index: dict[int, int] = {}
    new_pts = []

    def vid(key, point):
        if key < nv:
            return int(key)
        idx = key_index.get(key)
        if idx is None:
            idx = nv + len(new_pts)
            key_index[key] = idx
            new_pts.append(point)
        return idx

    def cut_id(lo, hi):
        dl, dh = d[lo], d[hi]
        if dh == 0.0:
            return int(hi)
        key = nv + lo * nv + hi
        idx = key_index.get(key)
        if idx is None:
            s = dl / (dl - dh)
            idx = nv + len(new_pts)
            key_index[key] = idx
            new_pts.append(mesh.vertices[lo] + s * (mesh.vertices[hi] - mesh.vertices[lo]))
        return idx

    extra_neg, extra_pos = [], []
    for ti in crossing.tolist():
        tri = t[ti].tolist()
        flags = [bool(neg[i]) for i in tri]
        # walk the triangle, emitting clipped polygons for each side
        poly_n, poly_p = [], []
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            fa, fb = flags[k], flags[(k + 1) % 3]
            if fa:
                poly_n.append(a)
            else:
                poly_p.append(a)
            if fa != fb:
                lo, hi = (a, b) if fa else (b, a)
                c = cut_id(lo, hi)
                poly_n.append(c)
                poly_p.append(c)
        for poly, dest in ((poly_n, extra_neg), (poly_p, extra_pos)):
            # collapse repeated consecutive ids (cuts that coincide with on-plane vertices)
            clean = [x for i, x in enumerate(poly) if x != poly[i - 1]]
            if len(clean) >= 3 and len(set(clean)) == len(clean):
                for j in range(1, len(clean) - 1):
                    dest.append((clean[0], clean[j], clean[j + 1]))
    if extra_neg:
        neg_tris.append(np.asarray(extra_neg, dtype=np.int64))
    if extra_pos:
        pos_tris.append(np.asarray(extra_pos, dtype=np.int64))

    # make sure every loop key has an id, then express loops as vertex ids
    loops = []
    for segs in _chain(keys):
        ring = []
        for s in segs:
            ring.append(vid(int(keys[s, 0]), pts[s, 0]))
        ring = [x for i, x in enumerate(ring) if x != ring[i - 1]]
        if len(ring) >= 3:
            loops.append(ring)
    verts = np.concatenate([mesh.vertices, np.asarray(new_pts).reshape(-1, 3)])
    return PlaneSplit(verts, np.concatenate(neg_tris).reshape(-1, 3),
                      np.concatenate(pos_tris).reshape(-1, 3), loops, plane)


COLLINEAR_RTOL = 1e-9


def _simplify_ring(p2: np.ndarray) -> tuple[list[int], dict]:
    """Drop ring points lying on the segment between their neighbours.

    Returns kept positions and, for each kept position, the dropped positions
    that follow it (in ring order) before the next kept one.
    """
    n = len(p2)
    keep = list(range(n))
    i = 0
    while len(keep) > 3 and i < len(keep):
        m = len(keep)
        a, b, c = p2[keep[i - 1]], p2[keep[i]], p2[keep[(i + 1) % m]]
        e1, e2 = b - a, c - b
        cross = e1[0] * e2[1] - e1[1] * e2[0]
        if abs(cross) <= COLLINEAR_RTOL * np.linalg.norm(e1) * np.linalg.norm(e2) and e1 @ e2 > 0:
            keep.pop(i)
            i = max(i - 1, 0)
        else:
            i += 1
    between = {}
    kept = set(keep)
    for idx, k in enumerate(keep):
        nxt = keep[(idx + 1) % len(keep)]
        run = []
        j = (k + 1) % n
        while j != nxt:
            if j not in kept:
                run.append(j)
            j = (j + 1) % n
        between[k] = run
    return keep, between


def triangulate_loops(vertices: np.ndarray, loops: list, plane: Plane):
    """Triangulate planar loops (outer CCW, holes CW about the plane normal).

    Returns ``(triangles, new_points)``: triangles face along +normal and may
    reference extra interior points, numbered from ``len(vertices)`` on.
    Collinear ring points are left out of the polygon handed to earcut and
    stitched back in afterwards, which keeps earcut away from zero-area ears.
    """
    new_points: list = []
    if not loops:
        return np.zeros((0, 3), dtype=np.int64), np.zeros((0, 3))
    u, v = plane.basis()
    rings = []
    for ring in loops:
        p = vertices[ring] - plane.point
        p2 = np.stack([p @ u, p @ v], axis=1)
        a, _ = _polygon_area_centroid(p2)
        rings.append((np.asarray(ring), p2, a))
    outers = [r for r in rings if r[2] > 0]
    holes = [r for r in rings if r[2] < 0]
    assigned: dict[int, list] = {i: [] for i in range(len(outers))}
    for h in holes:
        probe = h[1][0]
        best, best_area = None, np.inf
        for i, o in enumerate(outers):
            if o[2] < best_area and _point_in_ring(probe, o[1]):
                best, best_area = i, o[2]
        if best is not None:
            assigned[best].append(h)
    base = len(vertices)
    tris = []
    for i, o in enumerate(outers):
        group = [o] + assigned[i]
        ids, coords, ends = [], [], []
        inserts: dict = {}
        for ring_ids, p2, _ in group:
            keep, between = _simplify_ring(p2)
            for k in keep:
                run = [int(ring_ids[j]) for j in between[k]]
                if run:
                    nxt = int(ring_ids[keep[(keep.index(k) + 1) % len(keep)]])
                    inserts[(int(ring_ids[k]), nxt)] = run
            ids.append(ring_ids[keep])
            coords.append(p2[keep])
            ends.append(len(keep))
        ids = np.concatenate(ids)
        coords = np.concatenate(coords)
        idx = mapbox_earcut.triangulate_float64(coords, np.cumsum(ends).astype(np.uint32)).reshape(-1, 3)
        if len(idx) == 0:
            continue
        out = []
        for tri in ids[idx].tolist():
            poly = []
            for k in range(3):
                a, b = tri[k], tri[(k + 1) % 3]
                poly.append(a)
                if (a, b) in inserts:
                    poly.extend(inserts[(a, b)])
                elif (b, a) in inserts:
                    poly.extend(inserts[(b, a)][::-1])
            if len(poly) == 3:
                out.append(poly)
                continue
            # fan the triangle, now carrying extra points on its edges, from its centroid
            c = base + len(new_points)
            new_points.append(vertices[tri].mean(axis=0))
            out.extend([poly[k], poly[(k + 1) % len(poly)], c] for k in range(len(poly)))
        tri = np.asarray(out, dtype=np.int64)
        allv = np.concatenate([vertices, np.asarray(new_points).reshape(-1, 3)])
        # earcut winds all triangles of one call the same way; decide the
        # facing from the summed area so slivers cannot vote individually
        corners = allv[tri]
        fn = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]) @ plane.normal
        if fn.sum() < 0:
            tri = tri[:, ::-1]
        tris.append(tri)
    if not tris:
        return np.zeros((0, 3), dtype=np.int64), np.zeros((0, 3))
    return np.concatenate(tris), np.asarray(new_points).reshape(-1, 3)


def _point_in_ring(p, ring) -> bool:
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cond = (y > p[1]) != (yn > p[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x + (p[1] - y) * (xn - x) / (yn - y)
    return bool(np.count_nonzero(cond & (p[0] < xi)) % 2)


def points_in_loops(points, loops) -> np.ndarray:
    """Even-odd containment of 2D points in a set of rings."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    inside = np.zeros(len(pts), dtype=bool)
    px, py = pts[:, 0:1], pts[:, 1:2]
    for ring in loops:
        x, y = ring[:, 0][None], ring[:, 1][None]
        xn, yn = np.roll(ring[:, 0], -1)[None], np.roll(ring[:, 1], -1)[None]
        cond = (y > py) != (yn > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x + (py - y) * (xn - x) / (yn - y)
        inside ^= (np.count_nonzero(cond & (px < xi), axis=1) % 2).astype(bool)
    return inside


def capped_halves(mesh: TriangleMesh, plane: Plane) -> tuple[TriangleMesh, TriangleMesh]:
    """Both halves of a plane cut, each closed with a planar cap."""
    sp = split_by_plane(mesh, plane)
    cap, extra = triangulate_loops(sp.vertices, sp.loops, plane)
    verts = np.concatenate([sp.vertices, extra])
    # the negative half is closed by a cap facing +normal; the positive by its reverse
    neg = TriangleMesh(verts, np.concatenate([sp.negative, cap]), mesh.units_scale)
    pos = TriangleMesh(verts, np.concatenate([sp.positive, cap[:, ::-1]]), mesh.units_scale)
    total = abs(volume_moments(mesh)[0])
    return _tidy(neg, total), _tidy(pos, total)


def _tidy(m: TriangleMesh, total_volume: float) -> TriangleMesh:
    # a face lying in the plane comes back as a zero-volume double layer; that side is empty
    if m.n_triangles == 0 or abs(volume_moments(m)[0]) <= 1e-12 * total_volume:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), m.units_scale)
    return m.compact()


def plane_cut(mesh: TriangleMesh, plane: Plane, keep: str = "positive") -> TriangleMesh:
    """Keep one side of ``plane`` and cap the cut so the result stays closed."""
    if keep not in ("positive", "negative"):
        raise ValueError("keep must be 'positive' or 'negative'")
    neg, pos = capped_halves(mesh, plane)
    out = pos if keep == "positive" else neg
    if out.n_triangles == 0:
        raise EmptyResultError(f"nothing on the {keep} side of the plane")
    return out
