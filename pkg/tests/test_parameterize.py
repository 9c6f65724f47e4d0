import numpy as np
import pytest
from hypothesis import given, strategies as st

from teichmap import beltrami as B, meshgen
from teichmap.mesh import TriMesh
from teichmap.parameterize import (ChartError, MobiusMap, default_corners, disk_chart, disk_to_triangle,
                                   half_plane_transform, harmonic_disk, harmonic_rect, inverse_stereo,
                                   normalize_sphere, planar_chart, pole_rotation, psi, psi_at,
                                   rotate_pole, stereo_project, stereographic)

angle = st.floats(0, 2 * np.pi, allow_nan=False)


def test_mobius_inverse_and_compose():
    m = MobiusMap(2, 1j, 0.5, 1)
    z = np.array([0.1, 1 + 1j, -2j])
    np.testing.assert_allclose(m.inverse()(m(z)), z, atol=1e-12)
    n = MobiusMap(1, 2, 0, 1)
    np.testing.assert_allclose(n.compose(m)(z), n(m(z)), atol=1e-12)


def test_singular_mobius_rejected():
    with pytest.raises(ValueError):
        MobiusMap(1, 2, 2, 4)


def test_psi_maps_disk_to_upper_half_plane():
    r = np.random.default_rng(0)
    z = np.sqrt(r.uniform(0, 0.98, 200)) * np.exp(2j * np.pi * r.uniform(size=200))
    assert (psi(z).imag > 0).all()
    assert np.abs(psi(np.exp(1j * np.linspace(0.1, 6, 20))).imag).max() < 1e-9


@given(t=angle)
def test_psi_at_sends_point_to_infinity(t):
    m = psi_at(np.exp(1j * t))
    assert abs(m.pole() - np.exp(1j * t)) < 1e-12
    assert m(0.3 * np.exp(1j * (t + 1))).imag > 0


@given(t=angle, gap=st.floats(0.05, 2.5))
def test_half_plane_transform_normalisation(t, gap):
    w1, w2 = np.exp(1j * t), np.exp(1j * (t - gap))
    T = half_plane_transform(w1, w2)
    assert abs(T(w1)) < 1e-9 and abs(T(w2) - 1) < 1e-9
    assert T(0.2 * np.exp(1j * t)).imag > 0
    mid = np.exp(1j * (t - gap / 2))
    assert abs(T.pole() - mid) < 1e-9


def test_half_plane_transform_rejects_bad_order():
    with pytest.raises(ChartError):
        half_plane_transform(1, -1)
    with pytest.raises(ChartError, match="clockwise"):
        half_plane_transform(np.exp(-0.2j), np.exp(0.2j))


def test_planar_chart_requires_flat_mesh():
    with pytest.raises(ChartError, match="planar"):
        planar_chart(meshgen.hemisphere_mesh(3))


def test_harmonic_rect_of_square_is_identity():
    m = meshgen.grid_square(6)
    ch = harmonic_rect(m, meshgen.square_corners(6))
    np.testing.assert_allclose(ch.coords, m.vertices[:, :2], atol=1e-12)


def test_harmonic_rect_of_curved_patch():
    m = meshgen.bumpy_patch(8, seed=1)
    ch = harmonic_rect(m, default_corners(m))
    assert ch.flip_count() == 0
    assert ch.coords.min() > -1e-12 and ch.coords.max() < 1 + 1e-12
    np.testing.assert_allclose(sorted(map(tuple, ch.coords[list(ch.corners)])),
                               [(0, 0), (0, 1), (1, 0), (1, 1)], atol=1e-12)


def test_harmonic_rect_corner_errors():
    m = meshgen.grid_square(4)
    with pytest.raises(ChartError, match="boundary"):
        harmonic_rect(m, (0, 4, 24, 12))
    with pytest.raises(ChartError, match="counterclockwise"):
        harmonic_rect(m, (0, 20, 24, 4))
    with pytest.raises(ChartError, match="simply-connected"):
        harmonic_rect(meshgen.annulus_mesh(0.5, 1, 2, 12), (0, 1, 2, 3))


def test_default_corners_finds_square_corners():
    m = meshgen.grid_square(5)
    assert set(default_corners(m)) == set(meshgen.square_corners(5))


def test_default_corners_on_round_boundary_splits_by_arc_length():
    m = meshgen.disk_mesh(4)
    c = default_corners(m)
    ang = np.sort(np.angle(m.vertices[list(c), 0] + 1j * m.vertices[list(c), 1]))
    np.testing.assert_allclose(np.diff(ang), np.pi / 2, atol=0.3)


def test_harmonic_disk_boundary_on_circle():
    m = meshgen.hemisphere_mesh(6)
    ch = harmonic_disk(m)
    np.testing.assert_allclose(np.abs(ch.z[m.boundary_vertices]), 1, atol=1e-12)
    assert ch.flip_count() == 0 and ch.kind == "disk"


def test_disk_chart_rejects_off_circle_boundary():
    with pytest.raises(ChartError):
        disk_chart(meshgen.grid_square(3))


@pytest.mark.parametrize("cut_angle", [0.0, np.pi, 2.0])
def test_disk_to_triangle(disk8, cut_angle):
    tri = disk_to_triangle(disk8, cut_angle=cut_angle)
    p0, p1, p2 = tri.corners
    assert abs(tri.z[p1]) < 1e-9 and abs(tri.z[p2] - 1) < 1e-9 and tri.z[p0].imag > 0
    assert tri.n_faces == disk8.n_faces - 1 and tri.flip_count() == 0
    bv = disk8.mesh.boundary_vertices
    assert np.all(tri.z[bv].imag == 0)
    inner = ~disk8.mesh.is_boundary_vertex
    assert (tri.z[inner].imag > 0).all()
    np.testing.assert_allclose(tri.transform.inverse()(tri.z[inner]), disk8.z[inner], atol=1e-9)
    assert abs(tri.extra["zeta"] - np.exp(1j * cut_angle)) < 0.3


def test_disk_to_triangle_needs_disk_chart(square8):
    with pytest.raises(ChartError):
        disk_to_triangle(square8)


def test_stereo_round_trip():
    p = normalize_sphere(meshgen.icosphere(2).vertices)
    p = p[p[:, 2] < 0.99]
    np.testing.assert_allclose(inverse_stereo(stereo_project(p)), p, atol=1e-12)
    with pytest.raises(ChartError):
        stereo_project(np.array([[0.0, 0.0, 1.0]]))


@given(t=angle, s=st.floats(0, np.pi, allow_nan=False))
def test_pole_rotation(t, s):
    a = np.array([np.sin(s) * np.cos(t), np.sin(s) * np.sin(t), np.cos(s)])
    R = pole_rotation(a)
    np.testing.assert_allclose(R @ a, [0, 0, 1], atol=1e-9)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_rotate_pole_checks_unit_points():
    with pytest.raises(ValueError):
        rotate_pole(np.array([[2.0, 0, 0]]), np.array([0, 0, 1.0]))


@pytest.mark.parametrize("level", [1, 2, 3])
def test_stereographic_chart_is_oriented(level):
    m = meshgen.icosphere(level)
    ch = stereographic(m)
    assert ch.flip_count() == 0
    assert ch.n_faces == m.n_faces - 1
    assert ch.removed_face is not None


def test_stereographic_rejects_open_mesh():
    with pytest.raises(ChartError, match="closed genus-0"):
        stereographic(meshgen.hemisphere_mesh(3))


def test_normalize_sphere_rejects_centre_vertex():
    with pytest.raises(ChartError):
        normalize_sphere(np.array([[0.0, 0, 0], [1, 0, 0], [-1, 0, 0]]))
