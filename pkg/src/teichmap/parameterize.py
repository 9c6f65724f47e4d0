"""Planar charts: harmonic flattening, Moebius half-plane charts and stereographic charts."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from . import beltrami
from .mesh import TriMesh, validate_topology

logger = logging.getLogger(__name__)

CHART_KINDS = ("rectangle", "disk", "triangle_from_disk", "stereo_triangle", "planar_given")


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class MobiusMap:
    """z -> (a z + b) / (c z + d), stored with a d - b c = 1."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det) <= 1e-300:
            raise ValueError("singular Moebius transformation")
        s = np.sqrt(complex(det))
        object.__setattr__(self, "a", complex(self.a / s))
        object.__setattr__(self, "b", complex(self.b / s))
        object.__setattr__(self, "c", complex(self.c / s))
        object.__setattr__(self, "d", complex(self.d / s))
        if abs(self.a * self.d - self.b * self.c) < 1e-12:
            raise ValueError("Moebius determinant too small after normalisation")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * z + self.b) / (self.c * z + self.d)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def compose(self, inner: "MobiusMap") -> "MobiusMap":
        """self after inner."""
        m = np.array([[self.a, self.b], [self.c, self.d]]) @ \
            np.array([[inner.a, inner.b], [inner.c, inner.d]])
        return MobiusMap(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    def pole(self) -> complex:
        return complex(np.inf) if self.c == 0 else -self.d / self.c


PSI = MobiusMap(1j, 1j, -1, 1)


def psi(z):
    """Disk to upper half-plane: i (1 + z) / (1 - z)."""
    return PSI(z)


def psi_at(zeta: complex) -> MobiusMap:
    """Half-plane map sending the boundary point ``zeta`` of the unit disk to infinity."""
    zeta = complex(zeta)
    return MobiusMap(1j, 1j * zeta, -1, zeta)


@dataclass(frozen=True, eq=False)
class PlanarChart:
    """A mesh together with planar vertex positions (the computational domain)."""

    mesh: TriMesh
    coords: np.ndarray
    kind: str = "planar_given"
    source: str = ""
    removed_face: int | None = None
    corners: tuple = ()
    transform: MobiusMap | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        c = beltrami.as_points(self.coords).copy()
        if len(c) != self.mesh.n_vertices:
            raise ChartError(f"chart has {len(c)} coordinates for {self.mesh.n_vertices} vertices")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if self.kind not in CHART_KINDS:
            raise ChartError(f"unknown chart kind {self.kind!r}")

    @property
    def faces(self) -> np.ndarray:
        return self.mesh.faces

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_faces(self) -> int:
        return self.mesh.n_faces

    @property
    def z(self) -> np.ndarray:
        return self.coords[:, 0] + 1j * self.coords[:, 1]

    @cached_property
    def coeffs(self) -> beltrami.FaceGradientCoeffs:
        return beltrami.face_gradient_coeffs(self)

    @cached_property
    def smoothing(self):
        return beltrami.smoothing_operator(self.faces, self.n_vertices)

    @property
    def areas(self) -> np.ndarray:
        return self.coeffs.area

    def flip_count(self) -> int:
        return beltrami.flip_count(self, self.coords)

    def with_coords(self, coords, kind=None) -> "PlanarChart":
        return PlanarChart(self.mesh, coords, kind or self.kind, self.source,
                           self.removed_face, self.corners, self.transform, dict(self.extra))


def planar_chart(mesh: TriMesh, kind: str = "planar_given") -> PlanarChart:
    """Use the xy coordinates of an already planar mesh as its chart."""
    if np.ptp(mesh.vertices[:, 2]) > 1e-9 * max(np.ptp(mesh.vertices[:, :2]), 1.0):
        raise ChartError("mesh is not planar (z varies); flatten it first")
    chart = PlanarChart(mesh, mesh.vertices[:, :2], kind, source=mesh.name)
    flips = chart.flip_count()
    if flips:
        raise ChartError(f"planar mesh has {flips} clockwise faces")
    return chart


def is_planar(mesh: TriMesh) -> bool:
    return bool(np.ptp(mesh.vertices[:, 2]) <= 1e-9 * max(np.ptp(mesh.vertices[:, :2]), 1.0))


# ------------------------------------------------------------- harmonic maps

def cotangent_weights(mesh: TriMesh, clamp: bool = True) -> sparse.csr_matrix:
    """Symmetric edge-weight matrix W_ij = (cot a_ij + cot b_ij) / 2."""
    v = mesh.vertices
    f = mesh.faces
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = f[:, (k + 1) % 3], f[:, (k + 2) % 3], f[:, k]
        e1 = v[i] - v[o]
        e2 = v[j] - v[o]
        cot = (e1 * e2).sum(1) / np.linalg.norm(np.cross(e1, e2), axis=1)
        rows += [i, j]
        cols += [j, i]
        vals += [0.5 * cot, 0.5 * cot]
    n = mesh.n_vertices
    W = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
    if clamp and (W.data < 0).any():
        logger.info("clamping %d negative cotangent weights", int((W.data < 0).sum()))
        W.data = np.maximum(W.data, 0.0)
    return W


def _harmonic_extension(mesh: TriMesh, fixed: np.ndarray, values: np.ndarray) -> np.ndarray:
    W = cotangent_weights(mesh)
    L = (sparse.diags(np.asarray(W.sum(1)).ravel()) - W).tocsr()
    n = mesh.n_vertices
    free = np.setdiff1d(np.arange(n), fixed)
    out = np.zeros((n, 2))
    out[fixed] = values
    if len(free):
        Lff = L[free][:, free].tocsc()
        rhs = -(L[free][:, fixed] @ values)
        sol = spsolve(Lff, rhs)
        sol = np.asarray(sol).reshape(len(free), -1)
        if not np.all(np.isfinite(sol)):
            raise ChartError("harmonic solve failed (singular Laplacian; disconnected mesh?)")
        out[free] = sol
    return out


def _require_disk_topology(mesh: TriMesh):
    rep = validate_topology(mesh)
    if rep.classification != "simply-connected open":
        raise ChartError(f"expected a simply-connected open mesh, got {rep.describe()}")
    return mesh.boundary_loops[0]


def _arc_params(points: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return s / s[-1]


def harmonic_rect(mesh: TriMesh, corners) -> PlanarChart:
    """Map a disk-like mesh onto [0,1]^2 with the four corners sent to 0, 1, 1+i, i."""
    loop = _require_disk_topology(mesh)
    corners = [int(c) for c in corners]
    if len(corners) != 4 or len(set(corners)) != 4:
        raise ChartError("need four distinct corner vertices")
    pos = {int(v): k for k, v in enumerate(loop)}
    missing = [c for c in corners if c not in pos]
    if missing:
        raise ChartError(f"corner vertices {missing} are not on the boundary")
    loop = np.roll(loop, -pos[corners[0]])
    pos = {int(v): k for k, v in enumerate(loop)}
    idx = [pos[c] for c in corners]
    if idx != sorted(idx):
        raise ChartError("corners are not in counterclockwise boundary order")
    targets = [0j, 1 + 0j, 1 + 1j, 1j]
    v = mesh.vertices
    ext = np.append(loop, loop[0])
    kpos = idx + [len(loop)]
    bvals = np.zeros((len(loop), 2))
    for s in range(4):
        seg = ext[kpos[s]:kpos[s + 1] + 1]
        t = _arc_params(v[seg])
        z = targets[s] + t * (targets[(s + 1) % 4] - targets[s])
        bvals[kpos[s]:kpos[s + 1]] = np.column_stack([z.real, z.imag])[:-1]
    coords = _harmonic_extension(mesh, loop, bvals)
    chart = PlanarChart(mesh, coords, "rectangle", source=mesh.name, corners=tuple(corners))
    flips = chart.flip_count()
    if flips:
        logger.warning("harmonic_rect produced %d flipped faces", flips)
    return chart


def default_corners(mesh: TriMesh, min_turn: float = np.pi / 6) -> tuple[int, int, int, int]:
    """Four boundary vertices in counterclockwise order to serve as rectangle corners.

    The four sharpest boundary turns are used when each turns by at least
    ``min_turn``; otherwise the corners split the boundary into arc-length quarters.
    """
    _require_disk_topology(mesh)
    loop = mesh.boundary_loops[0]
    if len(loop) < 4:
        raise ChartError("boundary has fewer than four vertices")
    p = mesh.vertices[loop]
    d_in = p - np.roll(p, 1, axis=0)
    d_out = np.roll(p, -1, axis=0) - p
    cosang = (d_in * d_out).sum(1) / (np.linalg.norm(d_in, axis=1) * np.linalg.norm(d_out, axis=1))
    turn = np.arccos(np.clip(cosang, -1.0, 1.0))
    top = np.sort(np.argsort(-turn)[:4])
    if turn[top].min() >= min_turn:
        return tuple(int(loop[i]) for i in top)
    t = _arc_params(np.vstack([p, p[:1]]))[:-1]
    idx = [int(np.argmin(np.abs(t - q))) for q in (0.0, 0.25, 0.5, 0.75)]
    return tuple(int(loop[i]) for i in idx)


def harmonic_disk(mesh: TriMesh, start: int | None = None) -> PlanarChart:
    """Map a disk-like mesh onto the unit disk, boundary by arc length from ``start``."""
    loop = _require_disk_topology(mesh)
    if start is not None:
        where = np.flatnonzero(loop == start)
        if not len(where):
            raise ChartError(f"start vertex {start} is not on the boundary")
        loop = np.roll(loop, -int(where[0]))
    v = mesh.vertices
    t = _arc_params(v[np.append(loop, loop[0])])[:-1]
    bvals = np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)])
    coords = _harmonic_extension(mesh, loop, bvals)
    chart = PlanarChart(mesh, coords, "disk", source=mesh.name)
    flips = chart.flip_count()
    if flips:
        logger.warning("harmonic_disk produced %d flipped faces", flips)
    return chart


def disk_chart(mesh: TriMesh) -> PlanarChart:
    """Planar unit-disk mesh used directly as a disk chart."""
    chart = planar_chart(mesh, kind="disk")
    rb = np.abs(chart.z[mesh.boundary_vertices])
    if np.abs(rb - 1).max() > 1e-9:
        raise ChartError("boundary vertices are not on the unit circle")
    return chart


# ------------------------------------------------------ disk -> half-plane

def half_plane_transform(w1: complex, w2: complex) -> MobiusMap:
    """Moebius map of the unit disk onto the upper half-plane cut between two circle points.

    The pole sits on the short arc between ``w1`` and ``w2``; afterwards a real
    affine map sends w1 to 0 and w2 to 1. ``w2`` must follow the pole
    counterclockwise-before ``w1`` (w1 is the first point met going ccw from the pole).
    """
    mid = complex(w1) + complex(w2)
    if abs(mid) < 1e-14:
        raise ChartError("cut points are antipodal; the cut arc is ambiguous")
    m = psi_at(mid / abs(mid))
    t = m(w1).real
    s = m(w2).real - t
    if not s > 0:
        raise ChartError("cut points are in clockwise order around the pole")
    return MobiusMap(1.0, -t, 0.0, s).compose(m)


def disk_to_triangle(chart: PlanarChart, cut_vertex: int | None = None,
                     cut_angle: float = 0.0) -> PlanarChart:
    """Cut one boundary face out of a disk chart and send the disk to the upper half-plane.

    The removed face is the one on the boundary edge leaving ``cut_vertex`` (default:
    the boundary vertex closest to ``exp(i cut_angle)``). The Moebius map sends the
    circle point in the middle of that edge to infinity, the two edge endpoints to
    p1 = 0 and p2 = 1 on the real axis, and the third vertex p0 into the upper
    half-plane, so the chart is a triangle with base [0, 1].
    """
    if chart.kind != "disk":
        raise ChartError(f"disk_to_triangle needs a disk chart, got kind={chart.kind!r}")
    mesh = chart.mesh
    z = chart.z
    loop = mesh.boundary_loops[0]
    if cut_vertex is None:
        cut_vertex = int(loop[np.argmin(np.abs(z[loop] - np.exp(1j * cut_angle)))])
    where = np.flatnonzero(loop == cut_vertex)
    if not len(where):
        raise ChartError(f"cut vertex {cut_vertex} is not on the boundary")
    nxt = int(loop[(where[0] + 1) % len(loop)])
    he = mesh.half_edges
    hit = np.flatnonzero((he[:, 0] == cut_vertex) & (he[:, 1] == nxt))
    face = int(hit[0] // 3)
    p0 = int(next(v for v in mesh.faces[face] if v not in (cut_vertex, nxt)))
    if abs(abs(z[p0]) - 1) < 1e-9:
        raise ChartError(f"boundary face {face} has no interior vertex; pick another cut")
    mid = z[cut_vertex] + z[nxt]
    zeta = mid / abs(mid)
    if np.min(np.abs(z - zeta)) < 1e-12:
        raise ChartError("a vertex sits on the pole of the half-plane map")
    # going ccw from the pole we meet nxt first, so nxt -> 0 and cut_vertex -> 1
    p1, p2 = nxt, int(cut_vertex)
    full = half_plane_transform(z[p1], z[p2])
    coords = full(z)
    on_circle = mesh.is_boundary_vertex & (np.abs(np.abs(z) - 1) < 1e-9)
    coords[on_circle] = coords[on_circle].real
    cut_mesh = mesh.with_faces_removed([face])
    out = PlanarChart(cut_mesh, coords, "triangle_from_disk", source=chart.source,
                      removed_face=face, corners=(p0, p1, p2), transform=full,
                      extra={"zeta": zeta})
    flips = out.flip_count()
    if flips:
        raise ChartError(f"half-plane chart has {flips} flipped faces; refine near the cut")
    return out


# ------------------------------------------------------------- sphere charts

def normalize_sphere(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    p = p - p.mean(axis=0)
    r = np.linalg.norm(p, axis=1)
    if (r < 1e-12).any():
        raise ChartError("vertex at the sphere centre")
    return p / r[:, None]


def stereo_project(points) -> np.ndarray:
    """(x, y, z) -> (x + i y) / (1 - z)."""
    p = np.asarray(points, dtype=float)
    den = 1.0 - p[:, 2]
    if (den < 1e-12).any():
        raise ChartError("vertex at the north pole cannot be projected")
    return (p[:, 0] + 1j * p[:, 1]) / den


def inverse_stereo(w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    r2 = np.abs(w) ** 2
    return np.column_stack([2 * w.real, 2 * w.imag, r2 - 1]) / (r2 + 1)[:, None]


def stereographic(mesh: TriMesh, north_face: int | None = None,
                  points: np.ndarray | None = None, recenter: bool = True,
                  may_flip=None) -> PlanarChart:
    """Stereographic chart of a genus-0 closed mesh with one face (the north face) removed.

    ``points`` optionally overrides the (normalised) sphere positions, e.g. after a
    pole rotation. With ``recenter`` the sphere is first rotated so the pole sits on
    the axis of the north face's circumcircle; otherwise a neighbour of the removed
    face whose circumcircle contains the pole is turned inside out by the projection.
    Face orientation is reversed in the chart because the projection reverses the
    outward orientation; the chart therefore stays counterclockwise.
    ``may_flip`` is an optional face mask (source indexing) of faces that are allowed
    to come out flipped, e.g. faces that are frozen anyway; on fine near-regular
    meshes the pole cannot clear the circumcircles of the removed face's neighbours.
    """
    rep = validate_topology(mesh)
    if rep.classification != "closed genus-0":
        raise ChartError(f"expected a closed genus-0 mesh, got {rep.describe()}")
    p = normalize_sphere(mesh.vertices) if points is None else np.asarray(points, float)
    if north_face is None:
        cz = p[mesh.faces].mean(axis=1)[:, 2]
        candidates = np.argsort(-cz)[:8] if recenter else [int(np.argmax(cz))]
    else:
        candidates = [int(north_face)]
    R = np.eye(3)
    guard = None if may_flip is None else ~np.asarray(may_flip, dtype=bool)
    if recenter:
        best = max((pole_margin(p, mesh.faces, int(f), others=guard) + (int(f),)
                    for f in candidates), key=lambda t: t[0])
        margin, pole, north_face = best
        if margin <= 0:
            raise ChartError("no pole position inside the north face keeps every other face "
                             "oriented; the mesh is too coarse or badly shaped there")
        R = pole_rotation(pole)
        p = p @ R.T
    north_face = int(north_face)
    w = stereo_project(p)
    keep = np.ones(mesh.n_faces, dtype=bool)
    keep[north_face] = False
    faces = mesh.faces[keep]
    area = beltrami.signed_double_areas(w, faces)
    if np.sum(area < 0) > len(area) / 2:
        faces = faces[:, [0, 2, 1]]
    cut = TriMesh(p, faces, name=mesh.name, _validated=True)
    chart = PlanarChart(cut, w, "stereo_triangle", source=mesh.name,
                        removed_face=north_face, corners=tuple(int(v) for v in mesh.faces[north_face]),
                        extra={"points": p, "rotation": R})
    flipped = beltrami.signed_double_areas(w, faces) <= 0
    if guard is not None:
        flipped &= guard[keep]
    if flipped.any():
        raise ChartError(f"stereographic chart has {int(flipped.sum())} flipped faces")
    return chart


def pole_margin(p, faces, face, n_sub=10, others=None):
    """Best pole direction inside ``face`` and its clearance from other circumcaps.

    Stereographic projection maps the circumcircle of a face to a circle and turns the
    face inside out exactly when the pole lies in its circumcap {x : n.x > d}.
    ``others`` restricts the faces that must stay oriented (default: all but ``face``).
    """
    e1 = p[faces[:, 1]] - p[faces[:, 0]]
    e2 = p[faces[:, 2]] - p[faces[:, 0]]
    n = np.cross(e1, e2)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    d = (n * p[faces[:, 0]]).sum(1)
    if others is None:
        others = np.ones(len(faces), dtype=bool)
    else:
        others = np.asarray(others, dtype=bool).copy()
    others[face] = False
    if not others.any():
        others[:] = True
        others[face] = False
    i, j = np.meshgrid(np.arange(n_sub + 1), np.arange(n_sub + 1))
    ok = i + j <= n_sub
    bary = np.column_stack([i[ok], j[ok], n_sub - i[ok] - j[ok]]) / n_sub
    bary = np.clip(bary, 0.02, None)
    pts = bary @ p[faces[face]]
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    margin = (d[others][None, :] - pts @ n[others].T).min(axis=1)
    k = int(np.argmax(margin))
    return float(margin[k]), pts[k]


def pole_rotation(source_pole) -> np.ndarray:
    """Rotation matrix taking the unit vector ``source_pole`` to (0, 0, 1)."""
    a = np.asarray(source_pole, dtype=float)
    if abs(np.linalg.norm(a) - 1) > 1e-6:
        raise ValueError("source pole must be a unit vector")
    a = a / np.linalg.norm(a)
    n = np.array([0.0, 0.0, 1.0])
    c = float(a @ n)
    if c < -1 + 1e-12:
        return np.diag([1.0, -1.0, -1.0])
    k = np.cross(a, n)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + K + K @ K / (1 + c)


def rotate_pole(points, source_pole) -> tuple[np.ndarray, np.ndarray]:
    """Rigidly rotate unit-sphere points so ``source_pole`` goes to the north pole.

    Returns the rotated points and the rotation matrix R (inverse: R.T).
    """
    p = np.asarray(points, dtype=float)
    if np.abs(np.linalg.norm(p, axis=-1) - 1).max() > 1e-6:
        raise ValueError("points are not on the unit sphere")
    R = pole_rotation(source_pole)
    return p @ R.T, R
