"""Watertightness checks and an in-repo repair pass.

Repair welds vertices, drops degenerate and duplicate triangles, unifies
winding per connected component by flood fill, fills small holes with a
centroid fan and finally orients every component outward.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import DegenerateMeshError, UnrepairableMeshError
from .core import TriangleMesh
from .io import WELD_TOLERANCE, weld_vertices

DEFAULT_MAX_HOLE_EDGES = 100


@dataclass
class RepairReport:
    welded_vertices: int = 0
    removed_degenerate: int = 0
    removed_duplicate: int = 0
    filled_holes: int = 0
    flipped_faces: int = 0
    components: int = 0

    @property
    def is_empty(self) -> bool:
        """True when repair changed nothing."""
        return not (self.welded_vertices or self.removed_degenerate or self.removed_duplicate
                    or self.filled_holes or self.flipped_faces)

    def to_dict(self) -> dict:
        return asdict(self)


def _edge_keys(edges: np.ndarray, n_vertices: int) -> np.ndarray:
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    return lo * n_vertices + hi


def edge_use_counts(mesh: TriangleMesh):
    """Undirected edge keys with the number of triangles using each."""
    keys = _edge_keys(mesh.directed_edges(), max(mesh.n_vertices, 1))
    return np.unique(keys, return_counts=True)


def is_watertight(mesh: TriangleMesh) -> bool:
    """Every edge shared by exactly two triangles with opposite winding."""
    if mesh.is_empty():
        return False
    d = mesh.directed_edges()
    # each directed edge must appear exactly once, and its reverse exactly once
    nv = max(mesh.n_vertices, 1)
    fwd = d[:, 0] * nv + d[:, 1]
    rev = d[:, 1] * nv + d[:, 0]
    uniq, counts = np.unique(fwd, return_counts=True)
    if np.any(counts != 1):
        return False
    return bool(np.all(np.isin(rev, uniq, assume_unique=False)))


def face_components(mesh: TriangleMesh) -> tuple[int, np.ndarray]:
    """Connected components of triangles sharing an edge."""
    m = mesh.n_triangles
    if m == 0:
        return 0, np.zeros(0, dtype=np.int64)
    keys = _edge_keys(mesh.directed_edges(), mesh.n_vertices)
    face = np.tile(np.arange(m), 3)
    order = np.argsort(keys, kind="stable")
    ks, fs = keys[order], face[order]
    same = ks[1:] == ks[:-1]
    a, b = fs[:-1][same], fs[1:][same]
    graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(m, m))
    n, labels = connected_components(graph, directed=False)
    return n, labels


def split_components(mesh: TriangleMesh) -> list[TriangleMesh]:
    n, labels = face_components(mesh)
    return [TriangleMesh(mesh.vertices, mesh.triangles[labels == i], mesh.units_scale).compact()
            for i in range(n)]


def _drop_bad_triangles(mesh: TriangleMesh, report: RepairReport, area_eps: float) -> TriangleMesh:
    t = mesh.triangles
    repeated = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
    areas = mesh.triangle_areas()
    degenerate = repeated | (areas <= area_eps)
    report.removed_degenerate += int(degenerate.sum())
    t = t[~degenerate]
    # duplicates regardless of winding; the first occurrence wins
    _, first = np.unique(np.sort(t, axis=1), axis=0, return_index=True)
    keep = np.zeros(len(t), dtype=bool)
    keep[first] = True
    report.removed_duplicate += int((~keep).sum())
    return TriangleMesh(mesh.vertices, t[keep], mesh.units_scale)


def _unify_winding(mesh: TriangleMesh, report: RepairReport) -> TriangleMesh:
    """Flood-fill consistent winding across edge-adjacent triangles."""
    t = mesh.triangles.copy()
    m = len(t)
    nv = mesh.n_vertices
    d = mesh.directed_edges()
    fwd = d[:, 0] * nv + d[:, 1]
    undirected_counts = edge_use_counts(mesh)[1]
    if len(np.unique(fwd)) == len(fwd) and np.all(undirected_counts <= 2):
        return mesh
    edge_faces: dict[int, list[int]] = {}
    keys = _edge_keys(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), nv)
    for idx, k in enumerate(keys.tolist()):
        edge_faces.setdefault(k, []).append(idx % m)
    for k, faces in edge_faces.items():
        if len(faces) > 2:
            raise UnrepairableMeshError(f"non-manifold edge shared by {len(faces)} triangles")
    flipped = np.zeros(m, dtype=bool)
    seen = np.zeros(m, dtype=bool)

    def directed(f):
        a, b, c = t[f]
        return ((a, b), (b, c), (c, a))

    for seed in range(m):
        if seen[seed]:
            continue
        seen[seed] = True
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            for a, b in directed(f):
                k = min(a, b) * nv + max(a, b)
                for g in edge_faces[k]:
                    if g == f:
                        continue
                    same_dir = (a, b) in directed(g)
                    if not seen[g]:
                        if same_dir:
                            t[g] = t[g][::-1]
                            flipped[g] = True
                        seen[g] = True
                        queue.append(g)
                    elif same_dir:
                        raise UnrepairableMeshError("mesh is not orientable")
    report.flipped_faces += int(flipped.sum())
    return TriangleMesh(mesh.vertices, t, mesh.units_scale)


def boundary_loops(mesh: TriangleMesh) -> list[list[int]]:
    """Chains of boundary vertices, each following the directed boundary edges."""
    d = mesh.directed_edges()
    nv = max(mesh.n_vertices, 1)
    fwd = d[:, 0] * nv + d[:, 1]
    rev = d[:, 1] * nv + d[:, 0]
    open_mask = ~np.isin(fwd, rev)
    nxt: dict[int, list[int]] = {}
    for a, b in d[open_mask].tolist():
        nxt.setdefault(a, []).append(b)
    loops = []
    while nxt:
        start = min(nxt)
        loop = [start]
        cur = start
        while True:
            outs = nxt.get(cur)
            if not outs:
                raise UnrepairableMeshError("open boundary does not close into a loop")
            b = outs.pop()
            if not outs:
                del nxt[cur]
            if b == start:
                break
            loop.append(b)
            cur = b
        loops.append(loop)
    return loops


def _fill_holes(mesh: TriangleMesh, report: RepairReport, max_hole_edges: int) -> TriangleMesh:
    loops = boundary_loops(mesh)
    if not loops:
        return mesh
    verts = [mesh.vertices]
    tris = [mesh.triangles]
    nv = mesh.n_vertices
    for loop in loops:
        if len(loop) > max_hole_edges:
            raise UnrepairableMeshError(
                f"hole with {len(loop)} boundary edges exceeds the limit of {max_hole_edges}")
        # boundary edges a->b belong to existing faces, so the fan uses b->a
        if len(loop) == 3:
            tris.append(np.array([[loop[2], loop[1], loop[0]]]))
        else:
            c = mesh.vertices[loop].mean(axis=0)
            verts.append(c[None])
            ring = np.array(loop)
            fan = np.stack([np.roll(ring, -1), ring, np.full(len(ring), nv)], axis=1)
            tris.append(fan)
            nv += 1
        report.filled_holes += 1
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris), mesh.units_scale)


def _orient_outward(mesh: TriangleMesh, report: RepairReport) -> TriangleMesh:
    n, labels = face_components(mesh)
    report.components = n
    t = mesh.triangles.copy()
    c = mesh.corners()
    vol = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2]))
    for i in range(n):
        sel = labels == i
        if vol[sel].sum() < 0:
            t[sel] = t[sel][:, ::-1]
            report.flipped_faces += int(sel.sum())
    return TriangleMesh(mesh.vertices, t, mesh.units_scale)


def validate_and_repair(mesh: TriangleMesh, max_hole_edges: int = DEFAULT_MAX_HOLE_EDGES,
                        weld_tol: float = WELD_TOLERANCE) -> tuple[TriangleMesh, RepairReport]:
    """Return a watertight, outward-oriented copy of ``mesh`` and what was changed.

    Raises UnrepairableMeshError rather than returning a partially repaired mesh.
    """
    if mesh.is_empty():
        raise DegenerateMeshError("cannot repair an empty mesh")
    report = RepairReport()
    v, t, merged = weld_vertices(mesh.vertices, mesh.triangles, weld_tol)
    report.welded_vertices = merged
    out = TriangleMesh(v, t, mesh.units_scale)
    scale = float(np.ptp(out.vertices, axis=0).max()) if out.n_vertices else 0.0
    out = _drop_bad_triangles(out, report, area_eps=(scale * 1e-12) ** 2)
    if out.is_empty():
        raise DegenerateMeshError("no valid triangles remain")
    out = _unify_winding(out, report)
    out = _fill_holes(out, report, max_hole_edges)
    out = _orient_outward(out, report)
    out = out.compact()
    if not is_watertight(out):
        raise UnrepairableMeshError("mesh is still not watertight after repair")
    if report.is_empty:
        # identity on valid input: hand back the caller's geometry untouched
        same = mesh.compact()
        if same.n_vertices == out.n_vertices and np.array_equal(same.triangles, out.triangles):
            return same, report
    return out, report


def connected_component_count(mesh: TriangleMesh) -> int:
    return face_components(mesh)[0]
