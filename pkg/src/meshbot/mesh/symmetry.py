"""Bilateral symmetry score by stratified point sampling."""
from __future__ import annotations

import numpy as np

from .core import Plane, TriangleMesh
from .slicing import cross_section, points_in_loops

N_SAMPLES = 100_000
N_LEVELS = 200
DEFAULT_SEED = 0


def bilateral_symmetry_score(mesh: TriangleMesh, plane: Plane, n_samples: int = N_SAMPLES,
                             seed: int = DEFAULT_SEED) -> float:
    """1 - vol(M xor mirror(M)) / (2 vol(M)), estimated by sampling.

    The sampling box is cut into slabs by planes that contain the mirror
    normal, so a point and its mirror image always share a slab and both
    containment queries reduce to 2D point-in-polygon tests on one section.
    """
    n = plane.normal
    _, w = plane.basis()          # slab direction, perpendicular to the mirror normal
    e = np.cross(w, n)            # third axis, completes (e, w, n)
    v = mesh.vertices
    both = np.concatenate([v, plane.mirror_points(v)])
    rel = both - plane.point
    lo = np.array([rel @ e, rel @ w, rel @ n]).min(axis=1)
    hi = np.array([rel @ e, rel @ w, rel @ n]).max(axis=1)
    volume = mesh.signed_volume()
    if volume <= 0 or np.any(hi - lo <= 0):
        return 0.0
    rng = np.random.default_rng(seed)
    per_level = max(1, n_samples // N_LEVELS)
    width = (hi[1] - lo[1]) / N_LEVELS
    levels = lo[1] + (np.arange(N_LEVELS) + rng.random(N_LEVELS)) * width
    mismatch = 0
    total = 0
    for s in levels:
        origin = plane.point + s * w
        section_plane = Plane(origin, w)
        pe = rng.uniform(lo[0], hi[0], per_level)
        pn = rng.uniform(lo[2], hi[2], per_level)
        total += per_level
        sec = cross_section(mesh, section_plane)
        if not sec.loops:
            continue
        # express samples and their mirror images in the section's 2D basis
        su, sv = section_plane.basis()
        pts = origin + pe[:, None] * e + pn[:, None] * n
        mir = origin + pe[:, None] * e - pn[:, None] * n
        to2d = lambda p: np.stack([(p - origin) @ su, (p - origin) @ sv], axis=1)
        a = points_in_loops(to2d(pts), sec.loops)
        b = points_in_loops(to2d(mir), sec.loops)
        mismatch += int(np.count_nonzero(a != b))
    box_volume = float(np.prod(hi - lo))
    sym_diff = mismatch / total * box_volume
    return float(np.clip(1.0 - sym_diff / (2.0 * volume), 0.0, 1.0))


def best_vertical_symmetry(mesh: TriangleMesh, center=None, **kwargs) -> tuple[float, Plane]:
    """Best score over the two axis-aligned vertical planes through ``center``."""
    if center is None:
        from .mass import mass_properties
        center = mass_properties(mesh).center_of_mass
    best = None
    for normal in ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)):
        plane = Plane(center, normal)
        score = bilateral_symmetry_score(mesh, plane, **kwargs)
        if best is None or score > best[0]:
            best = (score, plane)
    return best
