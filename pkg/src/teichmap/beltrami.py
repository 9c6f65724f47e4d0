"""Per-face differential operators on piecewise-linear planar maps.

A "chart" here is anything exposing ``coords`` ((n, 2) planar positions) and
``faces`` ((m, 3) ccw vertex triples); :class:`teichmap.parameterize.PlanarChart`
is the usual one. Beltrami fields are plain complex arrays with one value per face.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

MU_LIMIT = 1.0 - 1e-8
HIST_BINS = 64


class DegenerateMapError(ValueError):
    pass


@dataclass(frozen=True)
class FaceGradientCoeffs:
    """Gradient weights of the three vertex hat functions on every face.

    For a per-vertex scalar s, ``(A * s[faces]).sum(1)`` is the x-derivative on
    each face and ``(B * s[faces]).sum(1)`` the y-derivative.
    """

    A: np.ndarray          # (m, 3)
    B: np.ndarray          # (m, 3)
    double_area: np.ndarray  # (m,) signed, twice the triangle area
    faces: np.ndarray

    @property
    def area(self) -> np.ndarray:
        return 0.5 * np.abs(self.double_area)


@dataclass(frozen=True)
class FaceJacobian:
    a: np.ndarray  # du/dx
    b: np.ndarray  # du/dy
    c: np.ndarray  # dv/dx
    d: np.ndarray  # dv/dy


@dataclass(frozen=True)
class AlphaField:
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    clamped: int = 0


def as_points(values) -> np.ndarray:
    """Coerce complex (n,) or real (n, 2) per-vertex values to an (n, 2) array."""
    v = np.asarray(values)
    if np.iscomplexobj(v):
        return np.column_stack([v.real, v.imag])
    v = v.astype(float)
    if v.ndim != 2 or v.shape[1] < 2:
        raise ValueError(f"expected (n, 2) points or complex (n,), got shape {v.shape}")
    return v[:, :2]


def as_complex(values) -> np.ndarray:
    v = np.asarray(values)
    if np.iscomplexobj(v):
        return v.astype(complex)
    v = as_points(v)
    return v[:, 0] + 1j * v[:, 1]


def signed_double_areas(points, faces) -> np.ndarray:
    p = as_points(points)
    e1 = p[faces[:, 1]] - p[faces[:, 0]]
    e2 = p[faces[:, 2]] - p[faces[:, 0]]
    return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]


def face_gradient_coeffs(chart) -> FaceGradientCoeffs:
    faces = np.asarray(chart.faces)
    p = as_points(chart.coords)
    g = p[faces, 0]
    h = p[faces, 1]
    area2 = signed_double_areas(p, faces)
    tiny = np.abs(area2) <= 1e-300
    if tiny.any():
        raise DegenerateMapError(f"face {int(np.flatnonzero(tiny)[0])} is degenerate in the chart")
    gi, gj, gk = g.T
    hi, hj, hk = h.T
    A = np.column_stack([hj - hk, hk - hi, hi - hj]) / area2[:, None]
    B = np.column_stack([gk - gj, gi - gk, gj - gi]) / area2[:, None]
    return FaceGradientCoeffs(A, B, area2, faces)


def face_jacobian(coeffs: FaceGradientCoeffs, values) -> FaceJacobian:
    w = as_points(values)
    n_needed = int(coeffs.faces.max()) + 1
    if len(w) < n_needed:
        raise ValueError(f"map has {len(w)} values but faces reference {n_needed} vertices")
    s = w[coeffs.faces, 0]
    t = w[coeffs.faces, 1]
    return FaceJacobian(
        a=(coeffs.A * s).sum(1), b=(coeffs.B * s).sum(1),
        c=(coeffs.A * t).sum(1), d=(coeffs.B * t).sum(1))


def compute_mu(jac: FaceJacobian) -> np.ndarray:
    """Per-face Beltrami coefficient of an affine-per-face map."""
    num = (jac.a - jac.d) + 1j * (jac.c + jac.b)
    den = (jac.a + jac.d) + 1j * (jac.c - jac.b)
    bad = np.abs(den) <= 1e-14
    if bad.any():
        raise DegenerateMapError(
            f"face {int(np.flatnonzero(bad)[0])}: map is anti-conformal or degenerate")
    return num / den


def beltrami_of_map(chart, values, coeffs: FaceGradientCoeffs | None = None) -> np.ndarray:
    coeffs = face_gradient_coeffs(chart) if coeffs is None else coeffs
    return compute_mu(face_jacobian(coeffs, values))


def clamp_mu(mu, limit: float = MU_LIMIT) -> tuple[np.ndarray, int]:
    """Radially clamp |mu| to ``limit``; returns the field and the clamp count."""
    mu = np.asarray(mu, dtype=complex)
    r = np.abs(mu)
    over = r >= limit
    n = int(over.sum())
    if n:
        mu = mu.copy()
        mu[over] *= limit / r[over]
    return mu, n


def alpha_coeffs(mu) -> AlphaField:
    mu, n = clamp_mu(mu)
    if n:
        logger.info("clamped %d Beltrami values to |mu| = %.8f", n, MU_LIMIT)
    rho, tau = mu.real, mu.imag
    den = 1.0 - rho ** 2 - tau ** 2
    a1 = ((rho - 1) ** 2 + tau ** 2) / den
    a2 = -2 * tau / den
    a3 = (1 + 2 * rho + rho ** 2 + tau ** 2) / den
    return AlphaField(a1, a2, a3, clamped=n)


def discrete_divergence(chart, coeffs: FaceGradientCoeffs, field) -> np.ndarray:
    """Divergence of a per-face vector field, accumulated at vertices.

    Each face contributes ``area * (A_i V1 + B_i V2)`` to its vertex i, i.e. the
    weak divergence tested against the hat function of i; the area factor makes
    the curl-free identity hold on non-uniform meshes.
    """
    V = np.asarray(field, dtype=float)
    m = len(coeffs.faces)
    if V.shape != (m, 2):
        raise ValueError(f"field must have shape ({m}, 2), got {V.shape}")
    contrib = coeffs.area[:, None] * (coeffs.A * V[:, :1] + coeffs.B * V[:, 1:2])
    n = len(as_points(chart.coords))
    return np.bincount(coeffs.faces.ravel(), weights=contrib.ravel(), minlength=n)


def smoothing_operator(faces, n_vertices: int | None = None) -> sparse.csr_matrix:
    """Row-stochastic face-to-face averaging over vertex-sharing neighbours.

    A face's own value is excluded; an isolated face keeps its value.
    """
    faces = np.asarray(faces)
    m = len(faces)
    n = int(faces.max()) + 1 if n_vertices is None else n_vertices
    fv = sparse.csr_matrix((np.ones(3 * m), (np.repeat(np.arange(m), 3), faces.ravel())),
                           shape=(m, n))
    adj = (fv @ fv.T).tocsr()
    adj.setdiag(0)
    adj.eliminate_zeros()
    adj.data[:] = 1.0
    deg = np.asarray(adj.sum(1)).ravel()
    lonely = deg == 0
    if lonely.any():
        adj = adj + sparse.diags(lonely.astype(float))
        deg = np.where(lonely, 1.0, deg)
    return (sparse.diags(1.0 / deg) @ adj).tocsr()


def laplace_smooth(mu, chart=None, operator: sparse.spmatrix | None = None) -> np.ndarray:
    if operator is None:
        operator = getattr(chart, "smoothing", None)
        if operator is None:
            operator = smoothing_operator(chart.faces)
    return operator @ np.asarray(mu, dtype=complex)


def average_norm(mu, areas=None) -> np.ndarray:
    """Give every face the mean norm while keeping its phase.

    With ``areas`` the mean is area-weighted; faces with |mu| < 1e-12 become 0.
    """
    mu = np.asarray(mu, dtype=complex)
    r = np.abs(mu)
    if areas is None:
        k = r.sum() / len(r)
    else:
        w = np.asarray(areas, dtype=float)
        k = (w * r).sum() / w.sum()
    out = np.zeros_like(mu)
    ok = r >= 1e-12
    out[ok] = k * mu[ok] / r[ok]
    return out


def dilation(mu) -> float:
    s = float(np.max(np.abs(mu))) if len(mu) else 0.0
    if s >= 1:
        raise ValueError(f"sup |mu| = {s} >= 1: map is not quasi-conformal")
    return (1 + s) / (1 - s)


def flip_count(chart_src, values) -> int:
    """Faces whose image has non-positive signed area."""
    return int(np.sum(signed_double_areas(values, np.asarray(chart_src.faces)) <= 0))


@dataclass(frozen=True)
class FieldStats:
    mean: float
    std: float
    sup: float
    counts: np.ndarray
    edges: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "sup": self.sup}


def field_stats(mu) -> FieldStats:
    r = np.abs(np.asarray(mu))
    if r.size == 0:
        raise ValueError("empty input: Beltrami field has no faces")
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    # values >= 1 land in the last bin so counts always sum to the face count
    idx = np.minimum((r * HIST_BINS).astype(np.int64), HIST_BINS - 1)
    counts = np.bincount(idx, minlength=HIST_BINS)
    return FieldStats(float(r.mean()), float(r.std()), float(r.max()), counts, edges)


def write_histogram_csv(stats: FieldStats, path) -> None:
    rows = ["bin_center,count"]
    rows += [f"{c:.9g},{int(n)}" for c, n in zip(stats.centers, stats.counts)]
    Path(path).write_text("\n".join(rows) + "\n")
