"""Mass properties by signed-tetrahedron integration, and volume scaling."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateMeshError, OrientationError
from .core import MassProperties, TriangleMesh

TARGET_VOLUME = 6.3e-3  # m^3


def volume_moments(mesh: TriangleMesh) -> tuple[float, np.ndarray, np.ndarray]:
    """Zeroth, first and second volume moments about the origin.

    Each triangle forms a tetrahedron with the origin; for vertices
    (0, a, b, c) with determinant D the tetrahedron contributes
    D/6 to the volume, D/24 (a+b+c) to the first moment and
    D/120 (aa' + bb' + cc' + ss') with s = a+b+c to the second moment.
    """
    c = mesh.corners()
    a, b, cc = c[:, 0], c[:, 1], c[:, 2]
    det = np.einsum("ij,ij->i", a, np.cross(b, cc))
    s = a + b + cc
    vol = det.sum() / 6.0
    first = (det[:, None] * s).sum(axis=0) / 24.0
    second = (np.einsum("i,ij,ik->jk", det, a, a) + np.einsum("i,ij,ik->jk", det, b, b)
              + np.einsum("i,ij,ik->jk", det, cc, cc) + np.einsum("i,ij,ik->jk", det, s, s)) / 120.0
    return float(vol), first, second


def mass_properties(mesh: TriangleMesh, density: float = 1.0) -> MassProperties:
    """Volume, center of mass and inertia about the center of mass.

    The mesh must be closed and outward oriented; a negative signed volume
    raises OrientationError.
    """
    vol, first, second = volume_moments(mesh)
    scale = float(np.ptp(mesh.vertices, axis=0).max()) if mesh.n_vertices else 0.0
    if abs(vol) <= (scale ** 3) * 1e-15 or vol == 0.0:
        raise DegenerateMeshError("mesh encloses no volume")
    if vol < 0:
        raise OrientationError(f"negative volume {vol:.6g}; triangle winding is inverted")
    com = first / vol
    # covariance about the COM, then I = tr(C) E - C
    cov = second - vol * np.outer(com, com)
    inertia = density * (np.trace(cov) * np.eye(3) - cov)
    inertia = 0.5 * (inertia + inertia.T)
    return MassProperties(volume=vol, center_of_mass=com, inertia_tensor=inertia,
                          mass=density * vol, density=density)


def scale_to_volume(mesh: TriangleMesh, target_volume: float = TARGET_VOLUME) -> TriangleMesh:
    """Uniformly scale about the center of mass so the volume equals ``target_volume``."""
    if target_volume <= 0:
        raise ValueError("target volume must be positive")
    props = mass_properties(mesh)
    factor = (target_volume / props.volume) ** (1.0 / 3.0)
    v = props.center_of_mass + (mesh.vertices - props.center_of_mass) * factor
    return TriangleMesh(v, mesh.triangles.copy(), mesh.units_scale)


def scale_factor_to_volume(mesh: TriangleMesh, target_volume: float = TARGET_VOLUME) -> float:
    return (target_volume / mass_properties(mesh).volume) ** (1.0 / 3.0)
