import numpy as np
import pytest
from hypothesis import given, strategies as st

from teichmap import beltrami as B, lbs, meshgen
from teichmap.parameterize import disk_chart, planar_chart

from conftest import jittered_square

unit_mu = st.tuples(st.floats(0, 0.9), st.floats(0, 2 * np.pi)).map(lambda t: t[0] * np.exp(1j * t[1]))


def smooth_mu(chart, rng, amp=0.5):
    c = chart.coords[chart.faces].mean(axis=1)
    k = rng.normal(size=(3, 2))
    ph = rng.uniform(0, 2 * np.pi, 3)
    field = sum(np.exp(1j * (c @ k[j] * 3 + ph[j])) for j in range(3)) / 3
    field *= 0.5 + 0.5 * np.sin(c[:, 0] * 4 + ph[0])
    return amp * field / np.abs(field).max()


@given(mu0=unit_mu, w=st.floats(0.5, 3), h=st.floats(0.5, 3))
def test_rectangle_constant_mu_gives_affine_map(square8, mu0, w, h):
    # an affine map of the square onto [0,w]x[0,h] with mu0 exists only for real mu0
    mu_real = (w - h) / (w + h)
    f, st_ = lbs.solve_lbs(square8, np.full(square8.n_faces, mu_real),
                           lbs.rectangle_sliding(square8, width=w, height=h))
    np.testing.assert_allclose(f, square8.coords[:, 0] * w + 1j * square8.coords[:, 1] * h, atol=1e-8)
    assert st_.final_residual <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_dirichlet_round_trip_is_exact(seed):
    chart = planar_chart(jittered_square(8, seed=seed))
    rng = np.random.default_rng(seed)
    z = chart.z
    f = z + 0.2 * (rng.normal() * z ** 2 + rng.normal() * np.conj(z) ** 2 + 0.5j * np.conj(z))
    mu = B.beltrami_of_map(chart, f)
    g, _ = lbs.solve_lbs(chart, mu, lbs.dirichlet_full(chart, f), tol=1e-13)
    assert np.abs(g - f).max() < 1e-9


def test_mu_zero_matrix_is_cotangent_laplacian(square8):
    from teichmap.parameterize import cotangent_weights
    prob = lbs.LBSProblem(square8, lbs.dirichlet_full(square8))
    M = prob.stiffness(B.alpha_coeffs(np.zeros(square8.n_faces))).toarray()
    W = cotangent_weights(square8.mesh, clamp=False)
    np.testing.assert_allclose(M, np.diag(np.asarray(W.sum(1)).ravel()) - W.toarray(), atol=1e-12)


def test_stale_factor_is_replaced_when_cg_stalls(monkeypatch):
    from scipy.sparse.linalg import aslinearoperator
    from scipy import sparse
    chart = planar_chart(jittered_square(16, seed=1))
    prob = lbs.LBSProblem(chart, lbs.dirichlet_full(chart))
    mu = smooth_mu(chart, np.random.default_rng(0), amp=0.8)
    expected, _ = lbs.LBSProblem(chart, lbs.dirichlet_full(chart)).solve(mu)
    stale = {k: aslinearoperator(sparse.identity(K.shape[0]))
             for k, K in enumerate(prob.assemble(mu).constrained)}
    prob._factors.update(stale)
    monkeypatch.setattr(lbs, "LAGGED_BUDGET", 2)
    f, stats = prob.solve(mu)
    assert stats.final_residual <= 1e-10
    assert np.abs(f - expected).max() < 1e-9
    assert all(prob._factors.get(k) is not op for k, op in stale.items())


@pytest.mark.parametrize("make", [
    lambda ch: lbs.dirichlet_full(ch),
    lambda ch: lbs.rectangle_sliding(ch),
    lambda ch: lbs.free_boundary(),
])
def test_constrained_systems_are_symmetric_positive_definite(square8, make):
    lms = lbs.LandmarkSet.from_arrays([0, 80], [0, 1 + 1j])
    rng = np.random.default_rng(1)
    mu = 0.9 * rng.uniform(size=square8.n_faces) * np.exp(2j * np.pi * rng.uniform(size=square8.n_faces))
    sys_ = lbs.LBSProblem(square8, make(square8), lms).assemble(mu)
    for k in range(len(sys_.constrained)):
        A = sys_.constrained[k].toarray()
        np.testing.assert_allclose(A, A.T, atol=1e-12)
        np.linalg.cholesky(sys_.reduced(k).toarray())


def test_disk_circle_system_is_positive_definite(disk8):
    bv = disk8.mesh.boundary_loops[0]
    lms = lbs.LandmarkSet.from_arrays(bv[[0, 10, 25]], disk8.z[bv[[0, 10, 25]]])
    sys_ = lbs.LBSProblem(disk8, lbs.disk_circle(disk8), lms).assemble(np.full(disk8.n_faces, 0.4j))
    np.linalg.cholesky(sys_.reduced(0).toarray())


def test_soft_landmark_residual_shrinks_with_weight(square8):
    bspec = lbs.rectangle_sliding(square8)
    center = 40
    res = []
    for w in (1e-2, 1e-1, 1.0, 10.0, 100.0):
        lms = lbs.LandmarkSet([lbs.Landmark(center, 0.3 + 0.6j, "soft", w)])
        f, _ = lbs.solve_lbs(square8, None, bspec, lms)
        res.append(lms.residuals(f)[0])
    assert all(a > b for a, b in zip(res, res[1:]))
    assert res[-1] < 0.05 * res[0]


def test_soft_weight_override(square8):
    lms = lbs.LandmarkSet([lbs.Landmark(40, 0.3 + 0.6j, "soft", 1e-3)])
    f1, _ = lbs.solve_lbs(square8, None, lbs.rectangle_sliding(square8), lms)
    f2, _ = lbs.solve_lbs(square8, None, lbs.rectangle_sliding(square8), lms, soft_weight=1e3)
    assert lms.residuals(f2)[0] < lms.residuals(f1)[0]


def test_hard_landmark_is_exact(square8):
    lms = lbs.LandmarkSet.from_arrays([40], [0.45 + 0.55j])
    f, _ = lbs.solve_lbs(square8, np.full(square8.n_faces, 0.2), lbs.rectangle_sliding(square8), lms)
    assert lms.residuals(f)[0] < 1e-12
    assert B.flip_count(square8, f) == 0


def test_free_boundary_mu_zero_with_two_landmarks_is_similarity(square8):
    lms = lbs.LandmarkSet.from_arrays([0, 80], [1j, 2j + 1])
    f, _ = lbs.solve_lbs(square8, None, lbs.free_boundary(), lms)
    a = (2j + 1 - 1j) / (square8.z[80] - square8.z[0])
    np.testing.assert_allclose(f, 1j + a * (square8.z - square8.z[0]), atol=1e-8)


def test_free_boundary_reproduces_constant_mu(square8):
    mu0 = 0.3 - 0.2j
    lms = lbs.LandmarkSet.from_arrays([0, 80], [0, 1 + 1j])
    f, _ = lbs.solve_lbs(square8, np.full(square8.n_faces, mu0), lbs.free_boundary(), lms)
    np.testing.assert_allclose(B.beltrami_of_map(square8, f), mu0, atol=1e-8)


def test_disk_circle_rotation_is_a_fixed_point(disk8):
    # the circle constraint is linearised at the angles of the warm start
    bv = disk8.mesh.boundary_loops[0]
    pick = bv[[0, 16, 32]]
    rot = np.exp(0.3j)
    lms = lbs.LandmarkSet.from_arrays(pick, rot * disk8.z[pick])
    f, _ = lbs.solve_lbs(disk8, None, lbs.disk_circle(disk8), lms, x0=rot * disk8.z)
    np.testing.assert_allclose(f, rot * disk8.z, atol=1e-9)
    cold, _ = lbs.solve_lbs(disk8, None, lbs.disk_circle(disk8), lms)
    assert np.abs(cold - rot * disk8.z).max() < 0.1


def test_disk_circle_keeps_boundary_on_circle(disk8):
    bv = disk8.mesh.boundary_loops[0]
    pick = bv[[0, 16, 32]]
    lms = lbs.LandmarkSet.from_arrays(pick, np.exp(1j * (np.angle(disk8.z[pick]) + [0, 0.2, -0.1])))
    prob = lbs.LBSProblem(disk8, lbs.disk_circle(disk8), lms)
    f = None
    for _ in range(3):
        f, _ = prob.solve(np.full(disk8.n_faces, 0.2), x0=f)
        np.testing.assert_allclose(np.abs(f[bv]), 1, atol=1e-12)
        assert lms.residuals(f).max() < 1e-12
    assert B.flip_count(disk8, f) == 0


def test_warm_start_gives_same_solution(square8):
    rng = np.random.default_rng(2)
    mu = smooth_mu(square8, rng)
    prob = lbs.LBSProblem(square8, lbs.rectangle_sliding(square8))
    f1, _ = prob.solve(mu)
    f2, st2 = prob.solve(mu, x0=f1)
    np.testing.assert_allclose(f1, f2, atol=1e-8)
    assert st2.cg_iterations <= 2


def test_kernel_errors(square8, disk8):
    with pytest.raises(lbs.KernelError, match="insufficient"):
        lbs.LBSProblem(square8, lbs.free_boundary(), lbs.LandmarkSet.from_arrays([0], [0]))
    bv = disk8.mesh.boundary_loops[0]
    with pytest.raises(lbs.KernelError, match="insufficient"):
        lbs.LBSProblem(disk8, lbs.disk_circle(disk8), lbs.LandmarkSet.from_arrays(bv[:2], disk8.z[bv[:2]]))
    with pytest.raises(lbs.KernelError, match="translation"):
        lbs.LBSProblem(square8, lbs.BoundarySpec("disk_triangle", sliding=[(np.array([0, 1]), 1, 0.0)]))


def test_conflicting_constraints(square8):
    with pytest.raises(lbs.ConstraintError, match="two different"):
        lbs.LBSProblem(square8, lbs.rectangle_sliding(square8), lbs.LandmarkSet.from_arrays([0], [0.5]))
    with pytest.raises(lbs.ConstraintError, match="free"):
        lbs.LBSProblem(square8, lbs.pinned("dirichlet_full", {0: 0}))


def test_landmark_validation():
    with pytest.raises(lbs.ConstraintError, match="duplicate"):
        lbs.LandmarkSet.from_arrays([1, 1], [0, 1])
    with pytest.raises(lbs.ConstraintError):
        lbs.Landmark(0, 0, "medium")
    with pytest.raises(lbs.ConstraintError):
        lbs.Landmark(0, 0, "soft", 0.0)


def test_landmark_out_of_range(square8):
    with pytest.raises(lbs.ConstraintError, match="out of range"):
        lbs.LBSProblem(square8, lbs.rectangle_sliding(square8), lbs.LandmarkSet.from_arrays([999], [0]))


def test_boundary_spec_validation(square8):
    with pytest.raises(lbs.ConstraintError, match="unknown"):
        lbs.BoundarySpec("wobbly")
    with pytest.raises(lbs.ConstraintError, match="4 corner"):
        lbs.BoundarySpec("rectangle_sliding", corners={0: 0})
    with pytest.raises(lbs.ConstraintError, match="circle"):
        lbs.BoundarySpec("free", circle=[1, 2])
    with pytest.raises(lbs.ConstraintError, match="counterclockwise"):
        lbs.rectangle_sliding(square8, corners=(0, 72, 80, 8))


def test_mu_shape_checked(square8):
    with pytest.raises(ValueError, match="faces"):
        lbs.solve_lbs(square8, np.zeros(3), lbs.rectangle_sliding(square8))


def test_assemble_requires_boundary(square8):
    with pytest.raises(lbs.ConstraintError, match="insufficient"):
        lbs.assemble(square8, np.zeros(square8.n_faces))
    sys_ = lbs.assemble(square8, B.alpha_coeffs(np.zeros(square8.n_faces)),
                        bspec=lbs.rectangle_sliding(square8))
    assert len(sys_.constrained) == 2 and not sys_.coupled


def test_clamped_mu_is_counted(square8):
    mu = np.zeros(square8.n_faces, complex)
    mu[0] = 1.5
    _, st_ = lbs.solve_lbs(square8, mu, lbs.rectangle_sliding(square8))
    assert st_.clamp_count == 1


def test_coupling_matrix_is_antisymmetric_signed_area(square8):
    prob = lbs.LBSProblem(square8, lbs.free_boundary(), lbs.LandmarkSet.from_arrays([0, 80], [0, 1]))
    C = prob.coupling
    np.testing.assert_allclose((C + C.T).toarray(), 0, atol=1e-14)
    x, y = square8.coords.T
    assert x @ C @ y == pytest.approx(1.0)
    with pytest.raises(AttributeError):
        lbs.LBSProblem(square8, lbs.rectangle_sliding(square8)).coupling
