"""STL and OBJ reading and writing."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..errors import DegenerateMeshError, MeshFormatError
from .core import TriangleMesh

WELD_TOLERANCE = 1e-7


def weld_vertices(vertices, triangles, tol: float = WELD_TOLERANCE):
    """Merge vertices closer than ``tol``.

    Returns ``(vertices, triangles, n_merged)``. Clusters are formed
    transitively and represented by their lowest original index, so the
    output order follows first occurrence.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    n = len(vertices)
    if n == 0:
        return vertices, triangles, 0
    pairs = cKDTree(vertices).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        labels = np.arange(n)
    else:
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
    # relabel clusters in order of first occurrence
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    new_id = np.empty(len(first), dtype=np.int64)
    new_id[order] = np.arange(len(first))
    remap = new_id[labels]
    welded = vertices[np.sort(first)]
    return welded, remap[triangles], n - len(first)


def _read_stl(data: bytes) -> np.ndarray:
    if len(data) >= 84:
        (count,) = struct.unpack("<I", data[80:84])
        if 84 + 50 * count == len(data):
            rec = np.frombuffer(data, dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]),
                                count=count, offset=84)
            return rec["v"].astype(np.float64)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshFormatError("not a valid binary or ASCII STL") from exc
    if not text.lstrip().lower().startswith("solid"):
        raise MeshFormatError("ASCII STL must start with 'solid'")
    coords = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0].lower() == "vertex":
            if len(parts) != 4:
                raise MeshFormatError(f"bad vertex line: {line!r}")
            try:
                coords.append([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise MeshFormatError(f"bad vertex line: {line!r}") from exc
    if len(coords) % 3:
        raise MeshFormatError("vertex count is not a multiple of 3")
    return np.asarray(coords, dtype=np.float64).reshape(-1, 3, 3)


def _read_obj(text: str):
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshFormatError(f"line {lineno}: bad vertex") from exc
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                try:
                    i = int(tok.split("/")[0])
                except ValueError as exc:
                    raise MeshFormatError(f"line {lineno}: bad face index {tok!r}") from exc
                # OBJ is 1-based; negatives count back from the current vertex
                i = i - 1 if i > 0 else len(verts) + i
                if i < 0 or i >= len(verts):
                    raise MeshFormatError(f"line {lineno}: face index {tok} out of range")
                idx.append(i)
            if len(idx) < 3:
                raise MeshFormatError(f"line {lineno}: face with fewer than 3 vertices")
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    return np.asarray(verts, dtype=float).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format: str | None = None, units_scale: float = 1.0) -> TriangleMesh:
    """Load an STL (ASCII or binary) or OBJ file and weld coincident vertices.

    ``units_scale`` converts file units to meters.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    data = path.read_bytes()
    return parse_mesh(data, fmt, units_scale)


def parse_mesh(data: bytes, format: str, units_scale: float = 1.0) -> TriangleMesh:
    fmt = format.lower()
    if fmt == "stl":
        soup = _read_stl(data)
        verts = soup.reshape(-1, 3)
        tris = np.arange(len(verts)).reshape(-1, 3)
    elif fmt == "obj":
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MeshFormatError("OBJ is not valid text") from exc
        verts, tris = _read_obj(text)
    else:
        raise MeshFormatError(f"unsupported mesh format {format!r}")
    if len(tris) == 0:
        raise DegenerateMeshError("mesh has no triangles")
    if not np.all(np.isfinite(verts)):
        raise MeshFormatError("non-finite vertex coordinates")
    verts = verts * units_scale
    verts, tris, _ = weld_vertices(verts, tris)
    mesh = TriangleMesh(verts, tris, units_scale).compact()
    mesh.units_scale = units_scale
    return mesh


def stl_bytes(mesh: TriangleMesh, header: bytes = b"meshbot") -> bytes:
    """Binary STL encoding. Deterministic for a given mesh."""
    c = mesh.corners().astype("<f4")
    n = mesh.face_normals()
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0).astype("<f4")
    rec = np.zeros(mesh.n_triangles, dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]))
    rec["n"] = n
    rec["v"] = c
    return header.ljust(80, b"\0")[:80] + struct.pack("<I", mesh.n_triangles) + rec.tobytes()


def save_stl(mesh: TriangleMesh, path) -> Path:
    path = Path(path)
    path.write_bytes(stl_bytes(mesh))
    return path


def ascii_stl(mesh: TriangleMesh, name: str = "mesh") -> str:
    lines = [f"solid {name}"]
    n = mesh.face_normals()
    for tri, normal in zip(mesh.corners(), n):
        ln = np.linalg.norm(normal)
        normal = normal / ln if ln > 0 else normal
        lines.append("  facet normal {:.9g} {:.9g} {:.9g}".format(*normal))
        lines.append("    outer loop")
        for v in tri:
            lines.append("      vertex {:.17g} {:.17g} {:.17g}".format(*v))
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return "\n".join(lines) + "\n"


def save_obj(mesh: TriangleMesh, path) -> Path:
    path = Path(path)
    out = ["v {:.17g} {:.17g} {:.17g}".format(*v) for v in mesh.vertices]
    out += ["f {} {} {}".format(*(t + 1)) for t in mesh.triangles]
    path.write_text("\n".join(out) + "\n")
    return path
