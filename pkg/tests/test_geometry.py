import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from eigenshape.geometry import (
    Contour,
    GeometryError,
    Mesh,
    PointCloud,
    ShapeFamily,
    decimate,
    generate_blob,
    generate_contour,
    icosphere,
    load_shape,
    sample_pointcloud,
    save_shape,
    unit_square_grid,
)


# --- oracles ---------------------------------------------------------------

def ellipse_perimeter(a, b):
    """Adaptive quadrature of the ellipse arc-length integrand."""
    val, _ = quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0, 2 * math.pi,
                  limit=200)
    return val


def barycentric_residual(point, mesh):
    """Distance from a point to the nearest (unclamped) triangle plane patch.

    Solves the 2x2 barycentric system per face and keeps faces whose
    coordinates land inside the simplex; returns the smallest residual.
    """
    best = np.inf
    for f in mesh.faces:
        v0, v1, v2 = mesh.vertices[f]
        A = np.column_stack([v1 - v0, v2 - v0])
        uv, *_ = np.linalg.lstsq(A, point - v0, rcond=None)
        if uv.min() >= -1e-9 and uv.sum() <= 1 + 1e-9:
            best = min(best, float(np.linalg.norm(v0 + A @ uv - point)))
    return best


def point_triangle_distance(p, a, b, c):
    """Exact distance from p to triangle (a, b, c), brute-force region tests."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return np.linalg.norm(p - a)
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return np.linalg.norm(p - b)
    vc = d1 * d4 - d3 * d2
    if vc <= 0 <= d1 and d3 <= 0:
        t = d1 / (d1 - d3)
        return np.linalg.norm(p - (a + t * ab))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return np.linalg.norm(p - c)
    vb = d5 * d2 - d1 * d6
    if vb <= 0 <= d2 and d6 <= 0:
        t = d2 / (d2 - d6)
        return np.linalg.norm(p - (a + t * ac))
    va = d3 * d6 - d5 * d4
    if va <= 0 and d4 - d3 >= 0 and d5 - d6 >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return np.linalg.norm(p - (b + t * (c - b)))
    denom = 1.0 / (va + vb + vc)
    v, w = vb * denom, vc * denom
    return np.linalg.norm(p - (a + ab * v + ac * w))


def distance_to_mesh(p, mesh):
    return min(point_triangle_distance(p, *mesh.vertices[f]) for f in mesh.faces)


# --- containers ------------------------------------------------------------

def test_mesh_rejects_bad_index():
    verts = np.eye(3)
    with pytest.raises(GeometryError, match="face 0"):
        Mesh(verts, [[0, 1, 5]])


def test_mesh_rejects_degenerate_face():
    verts = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]
    with pytest.raises(GeometryError, match="degenerate"):
        Mesh(verts, [[0, 1, 2], [0, 1, 3]])


def test_mesh_rejects_disconnected():
    v, f = icosphere(0)
    verts = np.vstack([v, v + 10.0])
    faces = np.vstack([f, f + len(v)])
    with pytest.raises(GeometryError, match="disconnected"):
        Mesh(verts, faces)


def test_mesh_rejects_nonmanifold_edge():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]]
    faces = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]
    with pytest.raises(GeometryError, match="non-manifold"):
        Mesh(verts, faces)


def test_contour_needs_distinct_consecutive_points():
    with pytest.raises(GeometryError, match="coincide"):
        Contour([[0, 0], [0, 0], [1, 1]])


def test_pointcloud_minimum_size():
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((3, 3)))


# --- contour generator -----------------------------------------------------

def test_unit_circle_perimeter():
    c = generate_contour([1, 1], [0, 0, 0, 0], 256)
    assert abs(c.total_length() - 2 * math.pi) < 1e-3


def test_ellipse_perimeter_matches_quadrature():
    # oracle value: ellipse_perimeter(2, 1) = 9.688448...
    oracle = ellipse_perimeter(2.0, 1.0)
    assert abs(oracle - 9.6884) < 5e-4
    c = generate_contour([2, 1], [0, 0, 0, 0], 512)
    assert abs(c.total_length() - 9.6884) < 1e-2


def test_contour_rotation_preserves_edge_lengths():
    style = [1.3, 0.8, 0.1, -0.05, 0.08]
    base = generate_contour(style, [0, 0, 0, 0], 200)
    rot = generate_contour(style, [0.7, 0, 0, 0], 200)
    assert np.abs(base.edge_lengths() - rot.edge_lengths()).max() < 1e-12


def test_contour_pose_is_near_isometric():
    fam = ShapeFamily("contour2d", 128, seed=5)
    styles, poses = fam.draw_params(20)
    for s, p in zip(styles, poses):
        rest = generate_contour(s, np.zeros(4), 128).edge_lengths()
        posed = generate_contour(s, p, 128).edge_lengths()
        assert np.abs(posed / rest - 1).max() < 0.03


def test_contour_parameter_bounds():
    with pytest.raises(GeometryError):
        generate_contour([3.0, 1.0], [0, 0, 0, 0], 64)
    with pytest.raises(GeometryError):
        generate_contour([1, 1, 0.5], [0, 0, 0, 0], 64)
    with pytest.raises(GeometryError):
        generate_contour([1, 1], [0, 0.5, 0, 0], 64)
    with pytest.raises(GeometryError):
        generate_contour([1, 1], [0, 0, 0, 0], 2)


# --- blob generator ----------------------------------------------------------

def test_icosphere_counts():
    v, f = icosphere(0)
    assert len(v) == 12 and len(f) == 20
    mesh = generate_blob([1, 1, 1], np.zeros(7), 2)
    assert mesh.n_vertices == 162 and mesh.n_faces == 320
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-12)


def test_blob_rotation_preserves_edge_lengths():
    style = [1.2, 0.9, 1.1, 0.05, -0.08, 0.02, 0.1, -0.03]

    def lengths(mesh):
        e = mesh.edges()
        return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)

    base = generate_blob(style, np.zeros(7), 1)
    rot = generate_blob(style, [0, 0.4, -0.2, 0.9, 0, 0, 0], 1)
    assert np.abs(lengths(base) - lengths(rot)).max() < 1e-12


def test_blob_pose_is_near_isometric():
    fam = ShapeFamily("blob3d", 1, seed=11)
    styles, poses = fam.draw_params(10)

    def lengths(mesh):
        e = mesh.edges()
        return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)

    for s, p in zip(styles, poses):
        rest = lengths(generate_blob(s, np.zeros(7), 1))
        posed = lengths(generate_blob(s, p, 1))
        assert np.abs(posed / rest - 1).max() < 0.03


def test_generators_are_deterministic():
    fam = ShapeFamily("contour2d", 64, seed=42)
    a = fam.samples(3)
    b = fam.samples(3)
    for x, y in zip(a, b):
        assert np.array_equal(x.points, y.points)
    fam3 = ShapeFamily("blob3d", 1, seed=42)
    m1 = fam3.samples(2)
    m2 = fam3.samples(2)
    for x, y in zip(m1, m2):
        assert np.array_equal(x.vertices, y.vertices)
        assert np.array_equal(x.faces, y.faces)


def test_manifest_rebuild_is_bit_exact(tmp_path):
    fam = ShapeFamily("contour2d", 48, seed=7)
    manifest = fam.manifest(4)
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    rebuilt = ShapeFamily.rebuild_from_manifest(json.loads(path.read_text()))
    original = fam.samples(4)
    for a, b in zip(original, rebuilt):
        assert np.array_equal(a.points, b.points)


def test_same_style_different_pose_changes_embedding():
    fam = ShapeFamily("contour2d", 64, seed=3)
    styles, poses = fam.draw_params(2)
    a = fam.build(styles[0], poses[0])
    b = fam.build(styles[0], poses[1])
    assert not np.allclose(a.points, b.points)


# --- sampling ---------------------------------------------------------------

def test_vertex_mode_full_fraction_returns_vertices():
    mesh = generate_blob([1, 1, 1], np.zeros(7), 2)
    cloud = sample_pointcloud(mesh, 1.0, seed=0, mode="vertex")
    assert cloud.n_points == 162
    d = np.linalg.norm(cloud.points[:, None] - mesh.vertices[None], axis=2)
    assert d.min(axis=1).max() == 0.0


def test_uniform_sampling_lands_on_triangles():
    fam = ShapeFamily("blob3d", 2, seed=1)
    styles, poses = fam.draw_params(1)
    mesh = fam.build(styles[0], poses[0])
    cloud = sample_pointcloud(mesh, 0.2, seed=9)
    assert cloud.n_points == math.ceil(0.2 * mesh.n_vertices)
    for p in cloud.points[:25]:
        assert barycentric_residual(p, mesh) < 1e-9


def test_sampling_is_deterministic():
    mesh = generate_blob([1, 1, 1], np.zeros(7), 1)
    a = sample_pointcloud(mesh, 0.5, seed=4)
    b = sample_pointcloud(mesh, 0.5, seed=4)
    assert np.array_equal(a.points, b.points)
    c = sample_pointcloud(mesh, 0.5, seed=5)
    assert not np.array_equal(a.points, c.points)


def test_nonuniform_sampling_differs_from_uniform():
    mesh = generate_blob([1, 1, 1], np.zeros(7), 2)
    u = sample_pointcloud(mesh, 0.5, seed=4, mode="uniform")
    n = sample_pointcloud(mesh, 0.5, seed=4, mode="nonuniform")
    assert not np.array_equal(u.points, n.points)


# --- decimation ---------------------------------------------------------------

def test_decimate_single_collapse():
    mesh = generate_blob([1, 1, 1], np.zeros(7), 1)
    out = decimate(mesh, mesh.n_vertices - 1)
    assert out.n_vertices == mesh.n_vertices - 1  # Mesh() re-validates manifoldness


def test_decimated_sphere_stays_close_to_sphere():
    mesh = generate_blob([1, 1, 1], np.zeros(7), 3)
    out = decimate(mesh, 200)
    assert out.n_vertices == 200
    # one-sided: decimated vertices near the unit sphere
    radial = np.abs(np.linalg.norm(out.vertices, axis=1) - 1.0)
    assert radial.max() < 0.05
    # other side: dense sphere samples near the decimated surface
    probes, _ = icosphere(2)
    worst = max(distance_to_mesh(p, out) for p in probes)
    assert worst < 0.05


def test_decimate_validates_target():
    mesh = generate_blob([1, 1, 1], np.zeros(7), 1)
    with pytest.raises(GeometryError):
        decimate(mesh, mesh.n_vertices)
    with pytest.raises(GeometryError):
        decimate(mesh, 3)


# --- file round trips ---------------------------------------------------------

def test_off_round_trip(tmp_path):
    v, f = icosphere(0)
    mesh = Mesh(v, f)
    path = tmp_path / "shape.off"
    save_shape(mesh, path)
    back = load_shape(path)
    assert np.array_equal(back.faces, mesh.faces)
    assert np.abs(back.vertices - mesh.vertices).max() < 1e-6


def test_obj_round_trip(tmp_path):
    mesh = generate_blob([1.1, 0.9, 1.0, 0.05, 0, 0, 0, 0], np.zeros(7), 1)
    path = tmp_path / "shape.obj"
    save_shape(mesh, path)
    back = load_shape(path)
    assert np.array_equal(back.faces, mesh.faces)
    assert np.abs(back.vertices - mesh.vertices).max() < 1e-6


def test_off_bad_face_index_names_face(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n")
    with pytest.raises(GeometryError, match="face 0"):
        load_shape(path)


def test_vertex_only_obj_loads_as_pointcloud(tmp_path):
    path = tmp_path / "cloud.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n")
    cloud = load_shape(path)
    assert isinstance(cloud, PointCloud)
    assert cloud.n_points == 4


def test_xyz_round_trip(tmp_path):
    cloud = PointCloud(np.random.default_rng(0).standard_normal((10, 3)))
    path = tmp_path / "c.xyz"
    save_shape(cloud, path)
    back = load_shape(path)
    assert np.abs(back.points - cloud.points).max() < 1e-6


def test_contour_json_round_trip(tmp_path):
    c = generate_contour([1.5, 0.9, 0.1], [0.3, 0.005, 0.1, -0.2], 64)
    path = tmp_path / "c.json"
    save_shape(c, path)
    back = load_shape(path)
    assert isinstance(back, Contour)
    assert np.abs(back.points - c.points).max() < 1e-6


def test_unsupported_extension():
    with pytest.raises(GeometryError, match="extension"):
        load_shape("thing.stl")


def test_obj_ignores_unknown_records_with_warning(tmp_path):
    path = tmp_path / "tex.obj"
    path.write_text("vt 0 0\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.warns(UserWarning, match="vt"):
        shape = load_shape(path)
    assert isinstance(shape, Mesh)


# --- misc --------------------------------------------------------------------

def test_unit_square_grid_area():
    mesh = unit_square_grid(8)
    assert abs(mesh.total_area() - 1.0) < 1e-12


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.2, 5.0), n=st.integers(8, 64))
def test_contour_scaling_scales_lengths(scale, n):
    c = generate_contour([1, 1], [0, 0, 0, 0], n)
    scaled = Contour(c.points * scale)
    assert np.allclose(scaled.edge_lengths(), c.edge_lengths() * scale, rtol=1e-9)
