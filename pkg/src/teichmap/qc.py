"""Quasi-conformal iteration towards Teichmueller (uniform |nu|) maps.

Each step smooths the current Beltrami field, gives every face the mean norm,
and reconstructs a map with the linear Beltrami solver; the map's own Beltrami
coefficient becomes the next field.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import beltrami, lbs
from .parameterize import (PlanarChart, disk_to_triangle, half_plane_transform, pole_margin,
                           inverse_stereo, normalize_sphere, pole_rotation, stereo_project,
                           stereographic)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "E2", "sup_norm", "grad_norm", "step_diff", "flips", "clamps", "lm_residual")


class BijectivityError(RuntimeError):
    pass


class EmptyBandError(ValueError):
    pass


@dataclass
class IterationConfig:
    eps: float = 1e-4
    max_iters: int = 200
    pole_band: float = 0.99
    disk_band: float = 0.5
    soft_weight: float = lbs.DEFAULT_SOFT_WEIGHT
    cg_tol: float = 1e-10
    max_outer: int = 20

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if int(self.max_iters) < 1 or int(self.max_outer) < 1:
            raise ValueError("max_iters and max_outer must be at least 1")
        if not 0 < self.pole_band < 1:
            raise ValueError("pole_band must lie in (0, 1)")
        if not 0 < self.disk_band < 2:
            raise ValueError("disk_band is a radius around the cut and must lie in (0, 2)")
        if not self.cg_tol > 0 or not self.soft_weight > 0:
            raise ValueError("cg_tol and soft_weight must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterRecord:
    iter: int
    E2: float
    sup_norm: float
    grad_norm: float
    step_diff: float
    flips: int
    clamps: int
    lm_residual: float
    cg_iterations: int = 0
    wall_time: float = 0.0
    stage: int = 0


@dataclass
class IterationTrace:
    """One record per executed iteration, plus the state before the first one."""

    records: list = field(default_factory=list)
    initial: IterRecord | None = None

    def __len__(self):
        return len(self.records)

    def append(self, rec: IterRecord) -> None:
        self.records.append(rec)

    def extend(self, other: "IterationTrace", stage: int) -> None:
        offset = self.records[-1].iter if self.records else 0
        for r in other.records:
            self.records.append(IterRecord(**{**asdict(r), "iter": r.iter + offset, "stage": stage}))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def rows(self) -> list:
        rows = [self.initial] if self.initial is not None else []
        return rows + self.records

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows():
                w.writerow([r.iter] + [f"{getattr(r, c):.12g}" for c in TRACE_COLUMNS[1:4]]
                           + [f"{r.step_diff:.12g}", r.flips, r.clamps, f"{r.lm_residual:.6g}"])

    def to_list(self) -> list:
        return [{c: getattr(r, c) for c in TRACE_COLUMNS} for r in self.rows()]


@dataclass
class QCResult:
    map: np.ndarray            # complex per vertex (planar) or (n, 3) sphere points
    nu: np.ndarray
    trace: IterationTrace
    converged: bool
    chart: PlanarChart | None = None
    flip_count: int = 0
    clamp_count: int = 0
    cg_iterations: int = 0
    final_residual: float = 0.0
    lm_residual: float = 0.0
    stages: int = 1

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "max_iters"

    @property
    def stats(self) -> beltrami.FieldStats:
        return beltrami.field_stats(self.nu)

    @property
    def k(self) -> float:
        return float(np.abs(self.nu).mean())


def energy_E2(mu, chart) -> dict:
    """sup |nu| + the l2 norm of |nu| jumps across interior edges."""
    r = np.abs(np.asarray(mu))
    sup = float(r.max()) if r.size else 0.0
    mesh = chart.mesh if hasattr(chart, "mesh") else chart
    ef = mesh.interior_edge_faces
    g = float(np.sqrt(np.sum((r[ef[:, 0]] - r[ef[:, 1]]) ** 2))) if len(ef) else 0.0
    return {"E2": sup + g, "sup_norm": sup, "grad_norm": g}


def _record(it, nu, chart, step, flips, clamps, res, cg_its, t0, stage=0) -> IterRecord:
    e = energy_E2(nu, chart)
    return IterRecord(it, e["E2"], e["sup_norm"], e["grad_norm"], float(step), int(flips),
                      int(clamps), float(res), int(cg_its), time.perf_counter() - t0, stage)


def _max_res(lms: lbs.LandmarkSet, f, mode="hard") -> float:
    r = lms.residuals(f, mode)
    return float(r.max()) if len(r) else 0.0


def qc_iterate_open(chart: PlanarChart, bspec: lbs.BoundarySpec, lms: lbs.LandmarkSet | None = None,
                    cfg: IterationConfig | None = None, init_map=None,
                    check_bijective: bool = True, active=None, measure=None) -> QCResult:
    """Iterate f -> nu = mu(f) -> A(L(nu)) -> LBS until nu stops changing.

    ``init_map`` replaces the mu = 0 start (used to warm-start later stages of the
    alternating variants). ``active`` is an optional boolean face mask: smoothing,
    averaging and the stopping rule only see active faces, and inactive faces keep
    their current coefficient. It is meant for faces whose three vertices are all
    pinned, where the coefficient cannot change anyway. ``measure`` optionally
    replaces the chart Beltrami coefficient by another per-face measurement: an
    object with ``nu(f)`` and ``chart_mu(mu, f)``, the latter translating a wanted
    field back into chart coefficients for the solver (see TangentMeasure).
    """
    cfg = IterationConfig() if cfg is None else cfg
    lms = lbs.LandmarkSet() if lms is None else lms
    t0 = time.perf_counter()
    prob = lbs.LBSProblem(chart, bspec, lms)
    if measure is None:
        def nu_of(w):
            return beltrami.beltrami_of_map(chart, w, chart.coeffs)

        def chart_mu(mu, w):
            return mu
    else:
        nu_of, chart_mu = measure.nu, measure.chart_mu
    if init_map is None:
        f, st = prob.solve(None, tol=cfg.cg_tol)
        cg_its, clamps, resid = st.cg_iterations, st.clamp_count, st.final_residual
    else:
        f = beltrami.as_complex(init_map).copy()
        cg_its, clamps, resid = 0, 0, 0.0
    nu = nu_of(f)
    trace = IterationTrace()
    trace.initial = _record(0, nu, chart, np.nan, chart_flips(chart, f), clamps,
                            _max_res(lms, f), cg_its, t0)
    converged = False
    total_clamps = clamps
    if active is None:
        sel = slice(None)
        smooth = chart.smoothing
    else:
        sel = np.asarray(active, bool)
        if sel.shape != (chart.n_faces,) or not sel.any():
            raise ValueError("active must be a non-empty boolean mask over the chart faces")
        smooth = beltrami.smoothing_operator(chart.faces[sel], chart.n_vertices)
    for n in range(1, int(cfg.max_iters) + 1):
        mu = nu.copy()
        mu[sel] = beltrami.average_norm(beltrami.laplace_smooth(nu[sel], operator=smooth))
        f, st = prob.solve(chart_mu(mu, f), x0=f, tol=cfg.cg_tol)
        new = nu_of(f)
        step = float(np.max(np.abs(new[sel] - nu[sel])))
        nu = new
        cg_its += st.cg_iterations
        resid = st.final_residual
        total_clamps += st.clamp_count
        trace.append(_record(n, nu, chart, step, chart_flips(chart, f), st.clamp_count,
                             _max_res(lms, f), st.cg_iterations, t0))
        if step < cfg.eps:
            converged = True
            break
    flips = chart_flips(chart, f)
    result = QCResult(f, nu, trace, converged, chart, flips, total_clamps, cg_its, resid,
                      _max_res(lms, f))
    if check_bijective:
        _check_bijective(result)
    return result


def chart_flips(chart, f) -> int:
    return beltrami.flip_count(chart, beltrami.as_points(f))


def _check_bijective(res: QCResult):
    sup = float(np.abs(res.nu).max())
    if res.flip_count and sup < 1 - 1e-6:
        raise BijectivityError(f"final map has {res.flip_count} flipped faces with sup|nu| = {sup:.6f}")


# ------------------------------------------------------------------ disk pair

def boundary_interpolation(chart: PlanarChart, lms: lbs.LandmarkSet) -> np.ndarray:
    """Circle-to-circle boundary map interpolating boundary landmarks linearly in angle.

    Returns per-vertex targets (entries of interior vertices are their own position).
    """
    z = chart.z
    out = z.copy()
    loop = chart.mesh.boundary_loops[0]
    on = [lm for lm in lms if lm.vertex in set(loop.tolist())]
    if not on:
        return out
    src = np.array([np.angle(z[lm.vertex]) for lm in on])
    dst = np.array([np.angle(lm.target) for lm in on])
    order = np.argsort(src)
    src, dst = src[order], dst[order]
    # unwrap targets so the landmark map is increasing with the right winding
    dst = src + np.angle(np.exp(1j * (dst - src)))
    xs = np.concatenate([src - 2 * np.pi, src, src + 2 * np.pi])
    ys = np.concatenate([dst - 2 * np.pi, dst, dst + 2 * np.pi])
    th = np.angle(z[loop])
    out[loop] = np.exp(1j * np.interp(th, xs, ys))
    for lm in on:
        out[lm.vertex] = lm.target
    return out


def disk_pinned_spec(chart: PlanarChart, lms: lbs.LandmarkSet) -> lbs.BoundarySpec:
    """Whole boundary pinned by angle interpolation between boundary landmarks."""
    return lbs.dirichlet_full(chart, boundary_interpolation(chart, lms))


def _to_chart_landmarks(lms, transform, on_circle, skip=()) -> lbs.LandmarkSet:
    out = []
    for lm in lms:
        if lm.vertex in skip:
            continue
        w = complex(transform(lm.target))
        if on_circle[lm.vertex]:
            w = complex(w.real, 0.0)
        out.append(lbs.Landmark(lm.vertex, w, lm.mode, lm.weight))
    return lbs.LandmarkSet(out)


@dataclass
class HalfPlaneStage:
    """One half-plane sub-problem of a disk-to-disk map.

    ``tri`` is the source chart (disk cut at ``cut_angle``), ``target`` the Moebius
    map applied to image points, ``init`` the current map in chart coordinates and
    ``active`` the faces that are not completely frozen.
    """

    tri: PlanarChart
    target: object
    bspec: lbs.BoundarySpec
    lms: lbs.LandmarkSet
    init: np.ndarray
    active: np.ndarray
    band: np.ndarray


def half_plane_stage(chart: PlanarChart, lms: lbs.LandmarkSet, f, cut_angle: float,
                     band_radius: float) -> HalfPlaneStage:
    """Set up the half-plane sub-problem around the cut nearest ``exp(i cut_angle)``.

    Both sides are moved to the upper half-plane: the source by the cut of
    :func:`disk_to_triangle`, the target by the Moebius map whose pole lies between
    the images of the two cut vertices. Source vertices within ``band_radius`` of
    the cut point (and the removed face) are pinned at their current images, hard
    landmarks override those pins, and the remaining circle vertices slide along
    the real axis.
    """
    tri = disk_to_triangle(chart, cut_angle=cut_angle)
    _, p1, p2 = tri.corners
    f = beltrami.as_complex(f)
    z = chart.z
    near = np.flatnonzero(np.abs(z - tri.extra["zeta"]) < band_radius)
    if not len(near):
        raise EmptyBandError(f"no vertex within {band_radius} of the cut point; "
                             "use a larger disk band radius")
    T = half_plane_transform(f[p1], f[p2])
    F = T(f)
    on_circle = chart.mesh.is_boundary_vertex
    F[on_circle] = F[on_circle].real
    band = np.union1d(near, chart.mesh.faces[tri.removed_face])
    pins = {int(v): complex(F[v]) for v in band}
    for lm in _to_chart_landmarks(lms, T, on_circle):
        if lm.vertex in pins and lm.mode == "hard":
            pins[lm.vertex] = lm.target
    axis = np.setdiff1d(np.flatnonzero(on_circle), band)
    bspec = lbs.BoundarySpec("disk_triangle", dirichlet=pins, sliding=[(axis, 1, 0.0)])
    pinned = np.zeros(chart.n_vertices, bool)
    pinned[list(pins)] = True
    active = ~pinned[tri.faces].all(axis=1)
    return HalfPlaneStage(tri, T, bspec, _to_chart_landmarks(lms, T, on_circle, skip=set(pins)), F,
                          active, band)


def qc_iterate_disk_alternating(chart: PlanarChart, lms: lbs.LandmarkSet,
                                cfg: IterationConfig | None = None, init_map=None) -> QCResult:
    """Disk-to-disk iteration whose boundary slides along the unit circle.

    The start is the map with the whole boundary pinned by angle interpolation
    between boundary landmarks. Stages then alternate the half-plane cut between
    z = 1 and z = -1 (see :func:`half_plane_stage`) and run :func:`qc_iterate_open`
    there, warm-started from the current map. The outer loop stops when a stage
    changes the Beltrami coefficient, measured on the disk, by less than eps.
    """
    cfg = IterationConfig() if cfg is None else cfg
    if chart.kind != "disk":
        raise ValueError(f"expected a disk chart, got kind={chart.kind!r}")
    for lm in lms:
        if chart.mesh.is_boundary_vertex[lm.vertex] and abs(abs(lm.target) - 1) > 1e-9:
            raise lbs.ConstraintError(f"boundary landmark at vertex {lm.vertex} has a target "
                                      f"off the unit circle (|w| = {abs(lm.target):.12g})")
    t0 = time.perf_counter()
    if init_map is None:
        f, _ = lbs.solve_lbs(chart, None, disk_pinned_spec(chart, lms), lms, tol=cfg.cg_tol)
    else:
        f = beltrami.as_complex(init_map).copy()
    nu = beltrami.beltrami_of_map(chart, f)
    trace = IterationTrace()
    trace.initial = _record(0, nu, chart, np.nan, chart_flips(chart, f), 0, _max_res(lms, f), 0, t0)
    converged = False
    stage_res = None
    total_clamps = cg_its = 0
    for stage in range(int(cfg.max_outer)):
        hp = half_plane_stage(chart, lms, f, 0.0 if stage % 2 == 0 else np.pi, cfg.disk_band)
        sub = qc_iterate_open(hp.tri, hp.bspec, hp.lms, cfg, init_map=hp.init,
                              check_bijective=False, active=hp.active)
        f = hp.target.inverse()(sub.map)
        f[chart.mesh.is_boundary_vertex] /= np.abs(f[chart.mesh.is_boundary_vertex])
        new = beltrami.beltrami_of_map(chart, f)
        step = float(np.max(np.abs(new - nu)))
        nu = new
        trace.extend(sub.trace, stage)
        total_clamps += sub.clamp_count
        cg_its += sub.cg_iterations
        stage_res = sub
        logger.info("disk stage %d: %d iterations, stage step %.3e, k = %.5f",
                    stage, sub.iterations, step, np.abs(nu).mean())
        if step < cfg.eps:
            converged = True
            break
    result = QCResult(f, nu, trace, converged, chart, chart_flips(chart, f), total_clamps, cg_its,
                      stage_res.final_residual, _max_res(lms, f), stages=stage + 1)
    _check_bijective(result)
    return result


# ------------------------------------------------------------------ sphere

SOUTH_TO_NORTH = np.diag([1.0, -1.0, -1.0])


def sphere_flips(faces, points) -> int:
    """Faces whose image triangle is not outward-oriented on the unit sphere."""
    p = np.asarray(points, float)
    a, b, c = p[faces[:, 0]], p[faces[:, 1]], p[faces[:, 2]]
    return int(np.sum(np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) <= 0))


def linear_beltrami(M) -> np.ndarray:
    """Beltrami coefficient of 2x2 real linear maps (x, y) -> M (x, y), stacked (m, 2, 2)."""
    a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    return ((a - d) + 1j * (c + b)) / ((a + d) + 1j * (c - b))


def _linear_from_complex(p, q) -> np.ndarray:
    """Matrix of z -> p z + q conj(z)."""
    s, t = p + q, 1j * (p - q)
    return np.stack([np.stack([s.real, t.real], -1), np.stack([s.imag, t.imag], -1)], -2)


def _edge_matrix(e1, e2, faces, points) -> np.ndarray:
    v = points[faces]
    E = v[:, 1:] - v[:, :1]
    return np.stack([np.einsum("mjk,mk->mj", E, e1), np.einsum("mjk,mk->mj", E, e2)], 1)


def _unit_centroids(points, faces):
    c = points[faces].mean(axis=1)
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def chart_tangent_edges(points, faces) -> np.ndarray:
    """Triangle edges on the tangent plane at each face's (normalised) centroid.

    The frame is the pair of unit stereographic coordinate directions there
    (projection from (0, 0, 1)), so the layout is oriented and phased like the
    planar chart. Returns (m, 2, 2) with columns v1 - v0 and v2 - v0.
    """
    p = np.asarray(points, float)
    w = stereo_project(_unit_centroids(p, faces))
    u, v = w.real, w.imag
    r2 = u * u + v * v
    e1 = np.column_stack([1 + r2 - 2 * u * u, -2 * u * v, 2 * u]) / (1 + r2)[:, None]
    e2 = np.column_stack([-2 * u * v, 1 + r2 - 2 * v * v, 2 * v]) / (1 + r2)[:, None]
    return _edge_matrix(e1, e2, faces, p)


def free_tangent_edges(points, faces) -> np.ndarray:
    """Like chart_tangent_edges with an arbitrary in-plane rotation of the frame.

    Valid anywhere on the sphere. The Beltrami coefficient of a map does not
    depend on the rotation of the target frame, only on its orientation.
    """
    p = np.asarray(points, float)
    c = _unit_centroids(p, faces)
    v = p[faces]
    e1 = v[:, 1] - v[:, 0]
    e1 -= np.sum(e1 * c, axis=1, keepdims=True) * c
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return _edge_matrix(e1, np.cross(e1, c), faces, p)


def sphere_beltrami(mesh, src_points, dst_points) -> np.ndarray:
    """Per-face Beltrami coefficient of a sphere map, measured on the sphere.

    Each source and image triangle is laid out on the tangent plane at its
    centroid, so the norm does not depend on any chart. Phases refer to the
    stereographic frame of a two-chart atlas: faces in the southern hemisphere
    (source centroid z <= 0) use projection from the north pole, the others
    projection from the south pole.
    """
    faces = mesh.faces[:, [0, 2, 1]]
    src = np.asarray(src_points, float)
    dst = np.asarray(dst_points, float)
    south = src[mesh.faces].mean(axis=1)[:, 2] <= 0
    mu = np.empty(mesh.n_faces, complex)
    for sel, R in ((south, np.eye(3)), (~south, SOUTH_TO_NORTH)):
        if sel.any():
            S = chart_tangent_edges(src @ R.T, faces[sel])
            T = free_tangent_edges(dst @ R.T, faces[sel])
            mu[sel] = linear_beltrami(T @ np.linalg.inv(S))
    return mu


class TangentMeasure:
    """Sphere-measured Beltrami coefficients for maps expressed in a stereographic chart.

    ``nu(F)`` is the coefficient of the chart map F measured between the tangent
    layouts of source and image triangles; ``chart_mu(mu, F)`` converts a wanted
    measured field into the chart coefficient the linear solver must impose. Per
    face every map involved is affine, so the conversion is exact; it keeps the
    conformal part of the current map, which is lagged by one iteration. A face whose
    straight-edged chart image is inverted while positively oriented on the sphere gets
    a coefficient outside the unit disk; the solver clamps it, which keeps the face
    inverted in the chart as the sphere requires.
    """

    def __init__(self, chart: PlanarChart):
        self.faces = chart.faces
        S = chart_tangent_edges(chart.extra["points"], self.faces)
        self.S_inv = np.linalg.inv(S)
        self.A_inv = np.linalg.inv(_chart_edges(chart.z, self.faces) @ self.S_inv)

    def _parts(self, F):
        F = beltrami.as_complex(F)
        T = free_tangent_edges(inverse_stereo(F), self.faces)
        return T @ self.S_inv, _chart_edges(F, self.faces) @ np.linalg.inv(T)

    def nu(self, F) -> np.ndarray:
        return linear_beltrami(self._parts(F)[0])

    def chart_mu(self, mu, F) -> np.ndarray:
        G, B = self._parts(F)
        p = 0.5 * ((G[:, 0, 0] + G[:, 1, 1]) + 1j * (G[:, 1, 0] - G[:, 0, 1]))
        return linear_beltrami(B @ _linear_from_complex(p, p * mu) @ self.A_inv)


def _chart_edges(z, faces) -> np.ndarray:
    z = np.asarray(z)
    e = z[faces[:, 1:]] - z[faces[:, :1]]
    return np.stack([e.real, e.imag], 1)


@dataclass
class _FaceSet:
    coords: np.ndarray
    faces: np.ndarray


def qc_iterate_sphere(mesh_src, mesh_dst, landmarks, cfg: IterationConfig | None = None,
                      init_map=None) -> QCResult:
    """Genus-0 closed surfaces: alternate stereographic charts around the two poles.

    ``landmarks`` is a sequence of (source vertex, target) pairs, the target being a
    destination vertex index or a 3D point (projected onto the unit sphere). Even
    stages freeze the source vertices with z > pole_band at their current images
    (the identity in the first stage) and iterate in the chart centred on the
    south pole; odd stages do the same with the roles of the poles swapped. The
    source is projected from a pole inside its removed face, the images from a
    pole inside the image of that face, so both sides stay bounded. The outer
    loop stops when a stage changes the Beltrami coefficient (two-chart atlas) by
    less than eps. Returns unit-sphere image points.
    """
    cfg = IterationConfig() if cfg is None else cfg
    pairs = list(landmarks)
    if not pairs:
        raise ValueError("sphere registration needs at least one landmark pair")
    t0 = time.perf_counter()
    p = normalize_sphere(mesh_src.vertices)
    q = normalize_sphere(mesh_dst.vertices)
    lm_src = np.array([int(a) for a, _ in pairs], dtype=np.int64)
    lm_dst = np.empty((len(pairs), 3))
    for k, (a, b) in enumerate(pairs):
        if not 0 <= int(a) < len(p):
            raise lbs.ConstraintError(f"landmark source vertex {a} out of range")
        if np.ndim(b) == 0:
            if not 0 <= int(b) < len(q):
                raise lbs.ConstraintError(f"landmark destination vertex {b} out of range")
            lm_dst[k] = q[int(b)]
        else:
            pt = np.asarray(b, dtype=float)
            lm_dst[k] = pt / np.linalg.norm(pt)
    f = p.copy() if init_map is None else normalize_sphere(init_map)
    if len(set(lm_src.tolist())) != len(lm_src):
        raise lbs.ConstraintError("a source vertex appears in two landmark pairs")
    for R in (np.eye(3), SOUTH_TO_NORTH):
        if not ((p @ R.T)[:, 2] > cfg.pole_band).any():
            raise EmptyBandError(f"no vertex within the pole band z > {cfg.pole_band}; "
                                 "use a lower pole band threshold for this mesh resolution")
    nu = sphere_beltrami(mesh_src, p, f)
    trace = IterationTrace()
    trace.initial = _record(0, nu, mesh_src, np.nan, sphere_flips(mesh_src.faces, f), 0,
                            float(np.linalg.norm(f[lm_src] - lm_dst, axis=1).max()), 0, t0)
    converged = False
    total_clamps = cg_its = 0
    stage_res = None
    for stage in range(int(cfg.max_outer)):
        R = np.eye(3) if stage % 2 == 0 else SOUTH_TO_NORTH
        ps = p @ R.T
        near = np.zeros(len(p), bool)
        near[ps[:, 2] > cfg.pole_band] = True
        chart = stereographic(mesh_src, points=ps, may_flip=near[mesh_src.faces].all(axis=1))
        face = chart.removed_face
        band = np.union1d(np.flatnonzero(near), mesh_src.faces[face])
        pinned = np.zeros(len(p), bool)
        pinned[band] = True
        active = ~pinned[chart.faces].all(axis=1)
        # frozen faces never enter the solve, so only active ones must stay oriented
        live = ~pinned[mesh_src.faces].all(axis=1)
        margin, pole = pole_margin(f, mesh_src.faces, face, others=live)
        if margin <= 0:
            logger.warning("sphere stage %d: image chart starts with flipped active faces", stage)
        Rt = pole_rotation(pole)
        F = stereo_project(f @ Rt.T)
        QW = stereo_project(lm_dst @ Rt.T)
        pins = {int(v): complex(F[v]) for v in band}
        for v, w in zip(lm_src, QW):
            if int(v) in pins:
                pins[int(v)] = complex(w)
        lms = lbs.LandmarkSet(lbs.Landmark(int(v), complex(w)) for v, w in zip(lm_src, QW)
                              if int(v) not in pins)
        bspec = lbs.BoundarySpec("sphere_triangle", dirichlet=pins)
        sub = qc_iterate_open(chart, bspec, lms, cfg, init_map=F, check_bijective=False,
                              active=active, measure=TangentMeasure(chart))
        f = inverse_stereo(sub.map) @ Rt
        new = sphere_beltrami(mesh_src, p, f)
        step = float(np.max(np.abs(new - nu)))
        nu = new
        trace.extend(sub.trace, stage)
        total_clamps += sub.clamp_count
        cg_its += sub.cg_iterations
        stage_res = sub
        logger.info("sphere stage %d: %d iterations, stage step %.3e, k = %.5f",
                    stage, sub.iterations, step, np.abs(nu).mean())
        if step < cfg.eps:
            converged = True
            break
    lm_res = float(np.linalg.norm(f[lm_src] - lm_dst, axis=1).max())
    result = QCResult(f, nu, trace, converged, None, sphere_flips(mesh_src.faces, f), total_clamps,
                      cg_its, stage_res.final_residual, lm_res, stages=stage + 1)
    _check_bijective(result)
    return result
