"""Synthetic meshes used by the tests, the acceptance suite and CLI demos."""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .mesh import TriMesh


def grid_square(nx: int, ny: int | None = None, width: float = 1.0,
                height: float = 1.0) -> TriMesh:
    """Structured (nx x ny)-cell grid on [0, width] x [0, height], 2 triangles per cell.

    Vertex (i, j) has index j * (nx + 1) + i; corners are 0, nx, last, last - nx.
    """
    ny = nx if ny is None else ny
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    a = (j * (nx + 1) + i).ravel()
    b, c, d = a + 1, a + nx + 2, a + nx + 1
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(verts, faces, name=f"grid{nx}x{ny}")


def square_corners(nx: int, ny: int | None = None) -> tuple[int, int, int, int]:
    ny = nx if ny is None else ny
    return 0, nx, (nx + 1) * (ny + 1) - 1, (nx + 1) * ny


def _orient_ccw(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = points
    e1 = p[faces[:, 1]] - p[faces[:, 0]]
    e2 = p[faces[:, 2]] - p[faces[:, 0]]
    neg = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    faces = faces.copy()
    faces[neg] = faces[neg][:, [0, 2, 1]]
    return faces


def disk_mesh(n_rings: int = 16, radius: float = 1.0) -> TriMesh:
    """Delaunay triangulation of concentric rings; ring k carries 6k points.

    Vertex 0 is the centre and the outer ring is written last, starting at angle 0.
    """
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        m = 6 * k
        shift = 0.0 if k == n_rings else 0.5 * (k % 2)
        th = 2 * np.pi * (np.arange(m) + shift) / m
        r = radius * k / n_rings
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    p = np.concatenate(pts)
    faces = _orient_ccw(p, Delaunay(p).simplices.astype(np.int64))
    return TriMesh(p, faces, name=f"disk{n_rings}")


def annulus_mesh(r_in: float, r_out: float = 1.0, n_r: int = 16,
                 n_theta: int = 96) -> TriMesh:
    """Log-polar structured annulus; radial spacing uniform in log r.

    Vertex (i, j) (radial i, angular j) has index i * n_theta + j; i = 0 is the
    inner circle.
    """
    rs = np.exp(np.linspace(np.log(r_in), np.log(r_out), n_r + 1))
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(rs, th, indexing="ij")
    # stagger alternate rings by half a step for better shaped triangles
    T = T + np.pi / n_theta * (np.arange(n_r + 1)[:, None] % 2)
    verts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    faces = []
    for i in range(n_r):
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            a, b = i * n_theta + j, i * n_theta + jn
            c, d = (i + 1) * n_theta + jn, (i + 1) * n_theta + j
            if i % 2 == 0:
                faces += [(a, b, d), (b, c, d)]
            else:
                faces += [(a, b, c), (a, c, d)]
    faces = _orient_ccw(verts, np.array(faces, dtype=np.int64))
    return TriMesh(verts, faces, name=f"annulus{n_r}x{n_theta}")


def icosphere(subdivisions: int = 3, tilt: float = 0.1234) -> TriMesh:
    """Subdivided icosahedron on the unit sphere.

    The sphere is tilted about the x- and y-axes so that no vertex sits exactly
    on a pole.
    """
    t = (1 + 5 ** 0.5) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        verts = list(v)

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        v, f = np.array(verts), np.array(nf)
    ca, sa, cb, sb = np.cos(tilt), np.sin(tilt), np.cos(0.7 * tilt), np.sin(0.7 * tilt)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    v = v @ (ry @ rx).T
    # outward orientation
    cen = v[f].mean(axis=1)
    nrm = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    inward = (nrm * cen).sum(1) < 0
    f = f.copy()
    f[inward] = f[inward][:, [0, 2, 1]]
    return TriMesh(v, f, name=f"icosphere{subdivisions}")


def hemisphere_mesh(n_rings: int = 12) -> TriMesh:
    """Upper unit hemisphere obtained by lifting ``disk_mesh`` (equal-angle rings)."""
    d = disk_mesh(n_rings)
    p = d.vertices[:, :2]
    r = np.linalg.norm(p, axis=1)
    polar = r * np.pi / 2
    scale = np.where(r > 0, np.sin(polar) / np.where(r > 0, r, 1), 0.0)
    xyz = np.column_stack([p * scale[:, None], np.cos(polar)])
    return TriMesh(xyz, d.faces, name=f"hemisphere{n_rings}")


def bumpy_patch(n_rings: int = 12, seed: int = 0) -> TriMesh:
    """Face-like open patch: a disk lifted by a smooth random height field."""
    rng = np.random.default_rng(seed)
    d = disk_mesh(n_rings)
    x, y = d.vertices[:, 0], d.vertices[:, 1]
    z = 0.6 * np.exp(-4 * (x ** 2 + 1.5 * y ** 2))  # a "nose"
    for _ in range(4):
        c = rng.uniform(-0.6, 0.6, 2)
        z += rng.uniform(-0.15, 0.15) * np.exp(-12 * ((x - c[0]) ** 2 + (y - c[1]) ** 2))
    return TriMesh(np.column_stack([x, 1.2 * y, z]), d.faces, name="patch")
