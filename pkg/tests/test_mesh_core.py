import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from meshbot.errors import (DegenerateMeshError, EmptyResultError, MeshFormatError, OrientationError,
                            UnrepairableMeshError)
from meshbot.mesh import (Plane, TriangleMesh, area_profile, cross_section, is_watertight, load_mesh,
                          mass_properties, plane_cut, scale_to_volume, validate_and_repair)
from meshbot.mesh.io import ascii_stl, save_obj, stl_bytes
from meshbot.mesh.repair import connected_component_count, split_components
from meshbot.mesh.shapes import (box, cylinder, dumbbell, icosphere, l_shape, sdf_capped_cylinder,
                                 sdf_sphere, unit_cube)
from meshbot.mesh.slicing import capped_halves
from meshbot.mesh.symmetry import bilateral_symmetry_score


# --- loading -------------------------------------------------------------

def test_ascii_stl_cube_welds_to_8_vertices(tmp_path):
    p = tmp_path / "cube.stl"
    p.write_text(ascii_stl(unit_cube(), "cube"))
    m = load_mesh(p)
    assert m.n_vertices == 8
    assert m.n_triangles == 12


def test_binary_and_ascii_stl_agree(tmp_path):
    a = tmp_path / "a.stl"
    b = tmp_path / "b.stl"
    a.write_text(ascii_stl(unit_cube()))
    b.write_bytes(stl_bytes(unit_cube()))
    ma, mb = load_mesh(a), load_mesh(b)
    np.testing.assert_array_equal(ma.triangles, mb.triangles)
    np.testing.assert_allclose(ma.vertices, mb.vertices, atol=1e-7)


def test_obj_round_trip(tmp_path):
    p = save_obj(unit_cube(), tmp_path / "c.obj")
    m = load_mesh(p)
    assert (m.n_vertices, m.n_triangles) == (8, 12)
    assert mass_properties(m).volume == pytest.approx(1.0)


def test_obj_out_of_range_index(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")
    with pytest.raises(MeshFormatError):
        load_mesh(p)


def test_empty_mesh_is_degenerate(tmp_path):
    p = tmp_path / "empty.obj"
    p.write_text("v 0 0 0\n")
    with pytest.raises(DegenerateMeshError):
        load_mesh(p)


def test_garbage_stl(tmp_path):
    p = tmp_path / "x.stl"
    p.write_bytes(b"\xff\xfe not an stl")
    with pytest.raises(MeshFormatError):
        load_mesh(p)


def test_units_scale(tmp_path):
    p = tmp_path / "mm.stl"
    p.write_text(ascii_stl(box((10, 10, 10))))
    m = load_mesh(p, units_scale=0.001)
    assert mass_properties(m).volume == pytest.approx(1e-6)


# --- repair --------------------------------------------------------------

def test_repair_identity_on_cube():
    cube = unit_cube()
    out, report = validate_and_repair(cube)
    assert report.is_empty
    np.testing.assert_array_equal(out.triangles, cube.triangles)
    np.testing.assert_array_equal(out.vertices, cube.vertices)


def test_repair_fills_missing_face():
    cube = unit_cube()
    holed = TriangleMesh(cube.vertices, cube.triangles[2:])
    assert not is_watertight(holed)
    out, report = validate_and_repair(holed)
    assert is_watertight(out)
    assert report.filled_holes == 1
    assert mass_properties(out).volume == pytest.approx(1.0)


def test_repair_two_interpenetrating_spheres():
    a = icosphere(0.1, 2)
    b = icosphere(0.1, 2, center=(0.15, 0, 0))
    soup = TriangleMesh(np.concatenate([a.vertices, b.vertices]),
                        np.concatenate([a.triangles, b.triangles[:, ::-1] + a.n_vertices]))
    out, report = validate_and_repair(soup)
    assert report.components == 2
    parts = split_components(out)
    assert len(parts) == 2
    for p in parts:
        assert is_watertight(p)
        assert p.signed_volume() > 0


def test_repair_unifies_winding():
    cube = unit_cube()
    t = cube.triangles.copy()
    t[[1, 4, 7]] = t[[1, 4, 7]][:, ::-1]
    out, report = validate_and_repair(TriangleMesh(cube.vertices, t))
    assert is_watertight(out)
    assert report.flipped_faces >= 3
    assert mass_properties(out).volume == pytest.approx(1.0)


def test_repair_drops_degenerate_and_duplicate():
    cube = unit_cube()
    t = np.concatenate([cube.triangles, cube.triangles[:1], [[0, 0, 1]]])
    out, report = validate_and_repair(TriangleMesh(cube.vertices, t))
    assert report.removed_duplicate == 1
    assert report.removed_degenerate == 1
    assert out.n_triangles == 12


def test_repair_rejects_large_hole():
    cyl = cylinder(0.02, 0.1, sections=128)
    # drop the top cap fan: a 128-edge hole
    top = cyl.vertices[cyl.triangles].mean(axis=1)[:, 2] > 0.0499
    open_cyl = TriangleMesh(cyl.vertices, cyl.triangles[~top]).compact()
    with pytest.raises(UnrepairableMeshError):
        validate_and_repair(open_cyl)
    out, report = validate_and_repair(open_cyl, max_hole_edges=200)
    assert is_watertight(out)


def test_repair_rejects_non_manifold():
    cube = unit_cube()
    extra = np.array([[0, 1, 8]])
    v = np.concatenate([cube.vertices, [[0.5, -1.0, 0.0]]])
    with pytest.raises(UnrepairableMeshError):
        validate_and_repair(TriangleMesh(v, np.concatenate([cube.triangles, extra, [[1, 0, 8]][::-1]])))


# --- mass properties -----------------------------------------------------

def test_unit_cube_mass_properties():
    mp = mass_properties(unit_cube(), density=1000)
    assert mp.volume == pytest.approx(1.0)
    np.testing.assert_allclose(mp.center_of_mass, [0.5, 0.5, 0.5])
    assert mp.mass == pytest.approx(1000.0)
    np.testing.assert_allclose(mp.inertia_tensor, np.eye(3) * 1000 / 6, atol=1e-9)


def test_icosphere_volume_within_half_percent():
    mp = mass_properties(icosphere(0.1, 4))
    exact = 4 / 3 * np.pi * 0.001
    assert abs(mp.volume - exact) / exact < 0.005


def test_box_inertia_analytic():
    a, b, c = 0.3, 0.12, 0.08
    mp = mass_properties(box((a, b, c), (1.0, -2.0, 0.5)), density=300)
    m = 300 * a * b * c
    expected = np.diag([m * (b * b + c * c), m * (a * a + c * c), m * (a * a + b * b)]) / 12
    np.testing.assert_allclose(mp.inertia_tensor, expected, rtol=1e-9, atol=1e-12)


def test_flipped_cube_orientation_error():
    with pytest.raises(OrientationError):
        mass_properties(unit_cube().flipped())


def test_rotation_equivariance():
    mesh = l_shape(0.1).translated((0.2, -0.1, 0.05))
    base = mass_properties(mesh, density=500)
    for R in Rotation.random(10, random_state=7).as_matrix():
        mp = mass_properties(mesh.transformed(R), density=500)
        np.testing.assert_allclose(mp.center_of_mass, R @ base.center_of_mass, rtol=1e-9, atol=1e-12)
        expect = R @ base.inertia_tensor @ R.T
        scale = np.abs(base.inertia_tensor).max()
        assert np.abs(mp.inertia_tensor - expect).max() <= 1e-9 * scale


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_inertia_symmetric_psd(a, b, c):
    mp = mass_properties(box((a, b, c)).transformed(Rotation.from_euler("xyz", [a, b, c]).as_matrix()))
    np.testing.assert_allclose(mp.inertia_tensor, mp.inertia_tensor.T)
    assert np.linalg.eigvalsh(mp.inertia_tensor).min() >= -1e-12 * np.abs(mp.inertia_tensor).max()


# --- scaling -------------------------------------------------------------

def test_scale_cube_8_to_1():
    big = box((2, 2, 2), (1, 1, 1))
    out = scale_to_volume(big, 1.0)
    np.testing.assert_allclose(np.ptp(out.vertices, axis=0), [1, 1, 1])
    np.testing.assert_allclose(mass_properties(out).center_of_mass, [1, 1, 1])


def test_scale_default_target(quadruped):
    out = scale_to_volume(quadruped)
    assert abs(mass_properties(out).volume - 6.3e-3) / 6.3e-3 < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-4, 10.0), st.floats(1e-3, 5.0))
def test_scale_idempotent(target, size):
    once = scale_to_volume(box((size, size / 2, size * 2)), target)
    assert abs(mass_properties(once).volume - target) / target < 1e-9
    twice = scale_to_volume(once, target)
    factor = np.ptp(twice.vertices, axis=0) / np.ptp(once.vertices, axis=0)
    np.testing.assert_allclose(factor, 1.0, atol=1e-9)


def test_scale_zero_volume_rejected():
    flat = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 1]])
    with pytest.raises(DegenerateMeshError):
        scale_to_volume(flat, 1.0)
    with pytest.raises(ValueError):
        scale_to_volume(unit_cube(), 0.0)


# --- sections ------------------------------------------------------------

def test_cube_mid_section():
    sec = cross_section(unit_cube(), Plane((0, 0, 0.5), (0, 0, 1)))
    assert sec.n_loops == 1
    assert sec.total_area == pytest.approx(1.0)
    np.testing.assert_allclose(sec.loop_centroids[0], [0.5, 0.5])
    np.testing.assert_allclose(sec.centroid(), [0.5, 0.5, 0.5])


def test_cylinder_section_area():
    r = 0.02
    cyl = cylinder(r, 0.1, sections=64)
    sec = cross_section(cyl, Plane((0, 0, 0), (0, 0, 1)))
    assert sec.n_loops == 1
    # the 64-gon inscribed in the circle
    polygon = 0.5 * 64 * r * r * np.sin(2 * np.pi / 64)
    assert sec.total_area == pytest.approx(polygon, rel=1e-12)
    assert abs(sec.total_area - np.pi * 0.0004) / (np.pi * 0.0004) < 0.01


def test_two_cylinders_two_loops():
    a = cylinder(0.02, 0.1, center=(-0.05, 0, 0))
    b = cylinder(0.02, 0.1, center=(0.05, 0, 0))
    both = TriangleMesh(np.concatenate([a.vertices, b.vertices]),
                        np.concatenate([a.triangles, b.triangles + a.n_vertices]))
    sec = cross_section(both, Plane((0, 0, 0.01), (0, 0, 1)))
    assert sec.n_loops == 2
    xs = sorted(c[0] for c in sec.loop_centroids)
    np.testing.assert_allclose(xs, [-0.05, 0.05], atol=1e-12)
    assert sec.total_area == pytest.approx(sum(sec.loop_areas), rel=1e-12)


def test_section_with_hole_has_negative_loop():
    ring_outer = cylinder(0.05, 0.1, sections=48)
    ring_inner = cylinder(0.02, 0.1, sections=48).flipped()
    tube = TriangleMesh(np.concatenate([ring_outer.vertices, ring_inner.vertices]),
                        np.concatenate([ring_outer.triangles, ring_inner.triangles + ring_outer.n_vertices]))
    sec = cross_section(tube, Plane((0, 0, 0), (0, 0, 1)))
    assert sorted(np.sign(sec.loop_areas)) == [-1, 1]
    assert sec.total_area == pytest.approx(sum(sec.loop_areas))


def test_section_missing_plane_is_empty():
    sec = cross_section(unit_cube(), Plane((0, 0, 3), (0, 0, 1)))
    assert sec.n_loops == 0 and sec.total_area == 0.0


def test_profile_cube_constant():
    prof = area_profile(unit_cube(), (0, 0, 1), 0.0, 1.0, 0.1)
    assert len(prof) == 11
    coords = [c for c, _ in prof]
    assert coords == sorted(coords)
    for _, sec in prof[1:-1]:
        assert sec.total_area == pytest.approx(1.0)


def test_profile_single_slice():
    prof = area_profile(unit_cube(), (0, 0, 1), 0.3, 0.3, 0.1)
    assert len(prof) == 1 and prof[0][0] == 0.3


def test_profile_continuity_on_sphere():
    step = 0.005
    prof = area_profile(icosphere(0.1, 3), (0, 0, 1), -0.095, 0.095, step)
    areas = np.array([s.total_area for _, s in prof])
    # |dA/dz| = 2 pi |z| <= 2 pi r for a sphere
    assert np.abs(np.diff(areas)).max() <= 2 * np.pi * 0.1 * step * 1.1


def _voxel_neck(radius=0.05, neck=0.01, sep=0.16, h=0.001):
    """Area per y slice by counting 1 mm cells inside the dumbbell field."""
    c = sep / 2
    ys = np.arange(-c, c + h / 2, h)
    g = np.arange(-radius, radius + h / 2, h) + h / 2
    X, Z = np.meshgrid(g, g, indexing="ij")
    areas = []
    for y in ys:
        p = np.stack([X, np.full_like(X, y), Z], axis=-1)
        f = np.minimum(np.minimum(sdf_sphere(p, (0, -c, 0), radius), sdf_sphere(p, (0, c, 0), radius)),
                       sdf_capped_cylinder(p, (0, -c, 0), (0, c, 0), neck))
        areas.append((f < 0).sum() * h * h)
    return _plateau_min(ys, np.array(areas))


def _plateau_min(coords, areas, rel=1e-6):
    """Global minimum; ties within ``rel`` go to the coordinate nearest zero."""
    low = areas <= areas.min() * (1 + rel)
    i = np.flatnonzero(low)[np.argmin(np.abs(coords[low]))]
    return coords[i], areas[i]


def test_dumbbell_neck_matches_voxel_oracle():
    step = 0.002
    mesh = dumbbell()
    prof = area_profile(mesh, (0, 1, 0), -0.08, 0.08, step)
    ys = np.array([c for c, _ in prof])
    areas = np.array([s.total_area for _, s in prof])
    neck_y, _ = _voxel_neck()
    found, area = _plateau_min(ys, areas)
    assert abs(found - neck_y) <= step
    assert area == pytest.approx(np.pi * 1e-4, rel=0.02)


# --- plane cuts ----------------------------------------------------------

def test_half_cube():
    half = plane_cut(unit_cube(), Plane((0, 0, 0.5), (0, 0, 1)), keep="positive")
    assert is_watertight(half)
    assert mass_properties(half).volume == pytest.approx(0.5)


def test_sphere_halves_equal():
    s = icosphere(0.1, 3)
    neg, pos = capped_halves(s, Plane((0, 0, 0), (0, 0, 1)))
    vn, vp = mass_properties(neg).volume, mass_properties(pos).volume
    assert abs(vn - vp) / vp < 1e-6
    assert is_watertight(neg) and is_watertight(pos)


def test_tangent_cut():
    cube = unit_cube()
    neg, pos = capped_halves(cube, Plane((0, 0, 1.0), (0, 0, 1)))
    assert abs(pos.signed_volume()) < 1e-9
    assert mass_properties(neg).volume == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(EmptyResultError):
        plane_cut(cube, Plane((0, 0, 1.0), (0, 0, 1)), keep="positive")


def test_cut_missing_mesh_empty():
    with pytest.raises(EmptyResultError):
        plane_cut(unit_cube(), Plane((0, 0, 2.0), (0, 0, 1)), keep="positive")


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.08, 0.08), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_cut_conserves_volume(offset, nx, ny, nz):
    n = np.array([nx, ny, nz])
    if np.linalg.norm(n) < 0.1:
        n = np.array([0.0, 0.0, 1.0])
    n = n / np.linalg.norm(n)
    mesh = icosphere(0.1, 2)
    neg, pos = capped_halves(mesh, Plane(n * offset, n))
    total = mesh.signed_volume()
    assert abs(neg.signed_volume() + pos.signed_volume() - total) / total < 1e-6
    for half in (neg, pos):
        assert is_watertight(half)


def test_cut_through_vertices_conserves_volume(quadruped):
    # planes passing exactly through mesh vertices exercise the on-plane rule
    for z in (0.08, 0.12, 0.16):
        neg, pos = capped_halves(quadruped, Plane((0, 0, z), (0, 0, 1)))
        parts = [p for p in (neg, pos) if p.n_triangles]
        total = quadruped.signed_volume()
        assert abs(sum(p.signed_volume() for p in parts) - total) / total < 1e-6
        for p in parts:
            assert is_watertight(p)


# --- symmetry ------------------------------------------------------------

def test_cube_mid_plane_symmetric():
    assert bilateral_symmetry_score(unit_cube(), Plane((0.5, 0.5, 0.5), (1, 0, 0))) >= 0.99


def test_offset_plane_scores_lower():
    cube = unit_cube()
    mid = bilateral_symmetry_score(cube, Plane((0.5, 0.5, 0.5), (1, 0, 0)))
    off = bilateral_symmetry_score(cube, Plane((1.0, 0.5, 0.5), (1, 0, 0)))
    # mirroring about a face leaves no overlap at all
    assert off < 0.05 < mid


def test_l_shape_asymmetric():
    mesh = l_shape(1.0)
    center = mesh.bounds().mean(axis=0)
    for n in np.eye(3):
        score = bilateral_symmetry_score(mesh, Plane(center, n))
        # two of the four blocks map onto each other: exact score 1 - 4 / 8
        assert score == pytest.approx(0.5, abs=0.02)
        assert score < 0.95


def test_symmetry_deterministic(quadruped):
    p = Plane((0, 0, 0), (1, 0, 0))
    assert bilateral_symmetry_score(quadruped, p, seed=3) == bilateral_symmetry_score(quadruped, p, seed=3)


def test_component_count():
    a = box((1, 1, 1))
    b = box((1, 1, 1), (3, 0, 0))
    both = TriangleMesh(np.concatenate([a.vertices, b.vertices]),
                        np.concatenate([a.triangles, b.triangles + 8]))
    assert connected_component_count(both) == 2


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.25, 0.25), st.floats(0.0, 0.16), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_quadruped_cuts_stay_closed(y, z, nx, ny, nz):
    from meshbot.mesh.shapes import synthetic_quadruped

    n = np.array([nx, ny, nz])
    if np.linalg.norm(n) < 0.1:
        n = np.array([0.0, 1.0, 0.0])
    mesh = synthetic_quadruped()
    neg, pos = capped_halves(mesh, Plane((0.0, y, z), n))
    total = mesh.signed_volume()
    parts = [p for p in (neg, pos) if p.n_triangles]
    assert abs(sum(p.signed_volume() for p in parts) - total) / total < 1e-6
    for p in parts:
        assert is_watertight(p)
