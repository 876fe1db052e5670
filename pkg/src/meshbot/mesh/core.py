from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TriangleMesh:
    """Indexed triangle soup. Vertices are stored in meters."""

    vertices: np.ndarray
    triangles: np.ndarray
    units_scale: float = 1.0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def copy(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices.copy(), self.triangles.copy(), self.units_scale)

    def bounds(self) -> np.ndarray:
        """(2, 3) array of min and max corners."""
        if self.n_vertices == 0:
            return np.zeros((2, 3))
        used = self.vertices[np.unique(self.triangles)] if self.n_triangles else self.vertices
        return np.stack([used.min(axis=0), used.max(axis=0)])

    def corners(self) -> np.ndarray:
        """(m, 3, 3) triangle corner coordinates."""
        return self.vertices[self.triangles]

    def face_normals(self) -> np.ndarray:
        """Unnormalized normals, length equal to twice the triangle area."""
        c = self.corners()
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(), axis=1)

    def signed_volume(self) -> float:
        c = self.corners()
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def transformed(self, rotation=None, translation=None) -> "TriangleMesh":
        """Return ``R @ v + t`` applied to every vertex."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriangleMesh(v, self.triangles.copy(), self.units_scale)

    def translated(self, offset) -> "TriangleMesh":
        return self.transformed(translation=offset)

    def flipped(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices.copy(), self.triangles[:, ::-1].copy(), self.units_scale)

    def compact(self) -> "TriangleMesh":
        """Drop unreferenced vertices."""
        used, inverse = np.unique(self.triangles, return_inverse=True)
        return TriangleMesh(self.vertices[used], inverse.reshape(-1, 3), self.units_scale)

    def directed_edges(self) -> np.ndarray:
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])


def concatenate(meshes) -> TriangleMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += m.n_vertices
    if not verts:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris))


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    def signed_distance(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.point) @ self.normal

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """In-plane unit vectors (u, v) with u x v = normal."""
        n = self.normal
        # first world axis not (nearly) parallel to the normal, projected into the plane
        for axis in np.eye(3):
            u = axis - (axis @ n) * n
            if np.linalg.norm(u) > 0.5:
                break
        u /= np.linalg.norm(u)
        return u, np.cross(n, u)

    def flipped(self) -> "Plane":
        return Plane(self.point, -self.normal)

    def mirror_points(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        d = self.signed_distance(p)
        return p - 2.0 * d[..., None] * self.normal

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "normal": self.normal.tolist()}


@dataclass
class MassProperties:
    volume: float
    center_of_mass: np.ndarray
    inertia_tensor: np.ndarray
    mass: float
    density: float = field(default=1.0)

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "center_of_mass": np.asarray(self.center_of_mass).tolist(),
            "inertia_tensor": np.asarray(self.inertia_tensor).tolist(),
            "mass": self.mass,
            "density": self.density,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MassProperties":
        return cls(
            volume=float(d["volume"]),
            center_of_mass=np.asarray(d["center_of_mass"], dtype=float),
            inertia_tensor=np.asarray(d["inertia_tensor"], dtype=float),
            mass=float(d["mass"]),
            density=float(d.get("density", 1.0)),
        )


@dataclass
class CrossSection:
    """Planar section of a closed mesh.

    ``loops`` are rings of 2D points in the plane basis; outer boundaries run
    counter-clockwise (positive area) and holes clockwise (negative area).
    """

    plane: Plane
    loops: list
    loop_areas: list
    loop_centroids: list
    total_area: float
    loop_keys: list = field(default_factory=list, repr=False)

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    def to_world(self, points2d) -> np.ndarray:
        u, v = self.plane.basis()
        p = np.atleast_2d(np.asarray(points2d, dtype=float))
        return self.plane.point + p[:, :1] * u + p[:, 1:2] * v

    def centroid(self) -> np.ndarray | None:
        """Area-weighted centroid of all loops, in world coordinates."""
        if not self.loops or abs(self.total_area) <= 0:
            return None
        c = sum(a * np.asarray(c) for a, c in zip(self.loop_areas, self.loop_centroids)) / self.total_area
        return self.to_world(c)[0]

    def loop_centroid_world(self, i: int) -> np.ndarray:
        return self.to_world(self.loop_centroids[i])[0]
