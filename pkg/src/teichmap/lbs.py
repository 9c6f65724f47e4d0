"""Linear Beltrami solver: reconstruct a planar map from a prescribed Beltrami field.

The map f = u + iv with Beltrami coefficient mu solves div(A grad u) = 0 and
div(A grad v) = 0, A being the symmetric (det 1) matrix built from the alpha
coefficients. Both equations share one stiffness matrix; boundary and landmark
constraints are applied per coordinate.

For the ``free`` family the two coordinates are coupled through the discrete
Jacobian determinant: the energy is the decoupled one minus the integral of
det Df, which leaves interior equations unchanged (det is a null Lagrangian)
and turns the natural boundary condition into the quasi-conformal one.

The ``disk_circle`` family uses the same coupled energy with boundary vertices
sliding on the unit circle: each such vertex is written in a normal/tangent frame
at its current angle, the normal coordinate is fixed to 1 and the solution is
projected back onto the circle.

CG is preconditioned with a sparse LU factorization of an earlier system matrix
of the same problem. Successive QC iterations change the matrix only slightly,
so the lagged factor keeps CG to a handful of iterations; it is refreshed when
CG needs more than ``REFACTOR_ITERS`` iterations, and a solve that fails within
``LAGGED_BUDGET`` iterations is restarted with a fresh factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, reverse_cuthill_mckee
from scipy.sparse.linalg import LinearOperator, cg, splu

from . import beltrami

logger = logging.getLogger(__name__)

FAMILIES = ("dirichlet_full", "rectangle_sliding", "disk_triangle", "sphere_triangle", "free",
            "disk_circle")
DEFAULT_SOFT_WEIGHT = 1e4
PIN_TOL = 1e-12
REFACTOR_ITERS = 25
LAGGED_BUDGET = 200


class ConstraintError(ValueError):
    pass


class KernelError(ConstraintError):
    pass


class SolverError(RuntimeError):
    pass


# ----------------------------------------------------------------- constraints

@dataclass
class BoundarySpec:
    """Boundary conditions of the target domain.

    ``dirichlet`` and ``corners`` pin both coordinates of a vertex; each ``sliding``
    entry (vertices, axis, value) fixes coordinate ``axis`` (0 = x, 1 = y);
    ``circle`` vertices slide on the unit circle.
    """

    family: str
    dirichlet: dict = field(default_factory=dict)
    sliding: list = field(default_factory=list)
    corners: dict = field(default_factory=dict)
    circle: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConstraintError(f"unknown boundary family {self.family!r}")
        if self.family == "rectangle_sliding" and len(self.corners) != 4:
            raise ConstraintError("rectangle_sliding needs exactly 4 corner pins")
        self.circle = np.asarray(self.circle, dtype=np.int64).ravel()
        if len(self.circle) and self.family != "disk_circle":
            raise ConstraintError("circle sliding is only available in the disk_circle family")

    @property
    def coupled(self) -> bool:
        return self.family in ("free", "disk_circle")

    def pinned_points(self) -> dict:
        out = {int(k): complex(v) for k, v in self.dirichlet.items()}
        for k, v in self.corners.items():
            k = int(k)
            if k in out and abs(out[k] - complex(v)) > PIN_TOL:
                raise ConstraintError(f"vertex {k} pinned to two different points")
            out[k] = complex(v)
        return out

    def to_dict(self) -> dict:
        return {"family": self.family, "n_dirichlet": len(self.dirichlet),
                "n_sliding": int(sum(len(s[0]) for s in self.sliding)),
                "n_corners": len(self.corners), "n_circle": len(self.circle)}


def dirichlet_full(chart, values=None) -> BoundarySpec:
    """Pin every boundary vertex; ``values`` is per-vertex (complex or (n,2)) or a callable of z."""
    bv = chart.mesh.boundary_vertices
    z = chart.z
    if values is None:
        w = z
    elif callable(values):
        w = np.asarray(values(z), dtype=complex)
    else:
        w = beltrami.as_complex(values)
    return BoundarySpec("dirichlet_full", dirichlet={int(v): complex(w[v]) for v in bv})


def free_boundary() -> BoundarySpec:
    return BoundarySpec("free")


def disk_circle(chart) -> BoundarySpec:
    """Every boundary vertex of a disk chart slides along the unit circle."""
    return BoundarySpec("disk_circle", circle=chart.mesh.boundary_vertices)


def pinned(family: str, points: dict) -> BoundarySpec:
    return BoundarySpec(family, dirichlet={int(k): complex(v) for k, v in points.items()})


def rectangle_sliding(chart, corners=None, width: float = 1.0, height: float = 1.0) -> BoundarySpec:
    """Corners to 0, W, W+iH, iH; the four sides slide along the rectangle's edges.

    ``corners`` are four boundary vertices in counterclockwise order (default:
    the chart's designated corners).
    """
    corners = tuple(int(c) for c in (chart.corners if corners is None else corners))
    if len(corners) != 4:
        raise ConstraintError("rectangle_sliding needs four corner vertices")
    loop = chart.mesh.boundary_loops[0]
    pos = {int(v): k for k, v in enumerate(loop)}
    if any(c not in pos for c in corners):
        raise ConstraintError("rectangle corners must be boundary vertices")
    loop = np.roll(loop, -pos[corners[0]])
    pos = {int(v): k for k, v in enumerate(loop)}
    idx = [pos[c] for c in corners] + [len(loop)]
    if idx[:4] != sorted(idx[:4]):
        raise ConstraintError("rectangle corners are not in counterclockwise order")
    targets = [0j, complex(width), complex(width, height), complex(0, height)]
    # side s runs from corner s to corner s+1: bottom y=0, right x=W, top y=H, left x=0
    fixes = [(1, 0.0), (0, float(width)), (1, float(height)), (0, 0.0)]
    sliding = []
    for s in range(4):
        side = loop[idx[s] + 1:idx[s + 1]]
        sliding.append((np.asarray(side, dtype=np.int64), fixes[s][0], fixes[s][1]))
    return BoundarySpec("rectangle_sliding", sliding=sliding,
                        corners={c: t for c, t in zip(corners, targets)})


def disk_triangle(chart, targets: dict | None = None) -> BoundarySpec:
    """Half-plane chart from a cut disk: pin p0 and p1, keep the real-axis boundary on the axis.

    ``targets`` maps vertices to pinned image points (default: p0 and p1 fixed
    at their chart positions). All other boundary vertices that lie on the real
    axis, p2 included, keep Im f = 0.
    """
    p0, p1, p2 = chart.corners
    z = chart.z
    if targets is None:
        targets = {p0: z[p0], p1: z[p1]}
    bv = chart.mesh.boundary_vertices
    axis = bv[(np.abs(z[bv].imag) <= 1e-12) & ~np.isin(bv, list(targets))]
    return BoundarySpec("disk_triangle", dirichlet={int(k): complex(v) for k, v in targets.items()},
                        sliding=[(np.asarray(axis, dtype=np.int64), 1, 0.0)])


@dataclass(frozen=True)
class Landmark:
    vertex: int
    target: complex
    mode: str = "hard"
    weight: float = DEFAULT_SOFT_WEIGHT

    def __post_init__(self):
        if self.mode not in ("hard", "soft"):
            raise ConstraintError(f"landmark mode must be hard or soft, got {self.mode!r}")
        if self.mode == "soft" and not self.weight > 0:
            raise ConstraintError("soft landmark weight must be positive")


class LandmarkSet:
    """Ordered landmarks, at most one per source vertex."""

    def __init__(self, landmarks=()):
        self._items: list[Landmark] = []
        self._index: dict[int, int] = {}
        for lm in landmarks:
            self.add(lm)

    def add(self, lm: Landmark) -> None:
        v = int(lm.vertex)
        if v in self._index:
            raise ConstraintError(f"duplicate landmark on vertex {v}")
        self._index[v] = len(self._items)
        self._items.append(Landmark(v, complex(lm.target), lm.mode, float(lm.weight)))

    @classmethod
    def from_arrays(cls, vertices, targets, mode="hard", weight=DEFAULT_SOFT_WEIGHT):
        t = beltrami.as_complex(targets) if np.ndim(targets) == 2 else np.asarray(targets, complex)
        return cls(Landmark(int(v), complex(w), mode, weight) for v, w in zip(vertices, t))

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    @property
    def hard(self) -> list[Landmark]:
        return [lm for lm in self._items if lm.mode == "hard"]

    @property
    def soft(self) -> list[Landmark]:
        return [lm for lm in self._items if lm.mode == "soft"]

    def vertices(self, mode=None) -> np.ndarray:
        return np.array([lm.vertex for lm in self._items if mode in (None, lm.mode)], dtype=np.int64)

    def targets(self, mode=None) -> np.ndarray:
        return np.array([lm.target for lm in self._items if mode in (None, lm.mode)], dtype=complex)

    def residuals(self, values, mode=None) -> np.ndarray:
        w = beltrami.as_complex(values)
        v = self.vertices(mode)
        return np.abs(w[v] - self.targets(mode)) if len(v) else np.zeros(0)

    def merged(self, other: "LandmarkSet") -> "LandmarkSet":
        return LandmarkSet(list(self) + list(other))


def _collect_fixed(bspec: BoundarySpec, lms: LandmarkSet, n: int):
    """Per-coordinate {vertex: value} dicts from boundary pins, sliding sides and hard landmarks."""
    fixed = [{}, {}]

    def put(axis, v, val, what):
        if not 0 <= v < n:
            raise ConstraintError(f"{what} vertex {v} out of range [0, {n})")
        old = fixed[axis].get(v)
        if old is not None and abs(old - val) > PIN_TOL:
            raise ConstraintError(
                f"vertex {v} constrained to two different values ({old} vs {val}) by {what}")
        fixed[axis][v] = val

    for v, w in bspec.pinned_points().items():
        put(0, v, w.real, "boundary pin")
        put(1, v, w.imag, "boundary pin")
    for verts, axis, val in bspec.sliding:
        if axis not in (0, 1):
            raise ConstraintError("sliding axis must be 0 or 1")
        for v in np.asarray(verts).ravel():
            put(axis, int(v), float(val), "sliding side")
    for lm in lms.hard:
        put(0, lm.vertex, lm.target.real, "hard landmark")
        put(1, lm.vertex, lm.target.imag, "hard landmark")
    for lm in lms.soft:
        if not 0 <= lm.vertex < n:
            raise ConstraintError(f"soft landmark vertex {lm.vertex} out of range")
    return fixed


# ----------------------------------------------------------------- assembly

@dataclass
class SolveStats:
    cg_iterations: int = 0
    final_residual: float = 0.0
    clamp_count: int = 0
    systems: int = 0

    def to_dict(self) -> dict:
        return {"cg_iterations": int(self.cg_iterations), "final_residual": float(self.final_residual),
                "clamp_count": int(self.clamp_count)}


@dataclass
class LinearSystem:
    """Stiffness matrix plus the constrained systems actually handed to CG.

    ``matrix`` is the raw vertex x vertex matrix; ``constrained`` holds one matrix
    per solved system (x and y, or a single coupled 2n system) with fixed rows and
    columns replaced by identity rows, ``rhs`` the matching right-hand sides.
    """

    matrix: sparse.csr_matrix
    constrained: list
    rhs: list
    fixed: list            # per system: (indices, values)
    penalty: list          # per system: (indices, weights)
    coupled: bool = False
    clamp_count: int = 0
    rotation: sparse.csr_matrix | None = None   # circle-sliding frame, if any

    def reduced(self, k: int = 0) -> sparse.csr_matrix:
        """Free-by-free block of system ``k`` (the matrix left after elimination)."""
        A = self.constrained[k]
        free = np.setdiff1d(np.arange(A.shape[0]), self.fixed[k][0])
        return A[free][:, free].tocsr()


class LBSProblem:
    """A chart with fixed constraints; solves LBS for many Beltrami fields.

    The CSR pattern, the coupling matrix and the constraint masks are computed
    once, so each solve costs one vectorised assembly plus CG.
    """

    def __init__(self, chart, bspec: BoundarySpec, lms: LandmarkSet | None = None,
                 soft_weight: float | None = None):
        self.chart = chart
        self.bspec = bspec
        self.lms = LandmarkSet() if lms is None else lms
        self.n = chart.n_vertices
        self.coeffs = chart.coeffs
        self.soft_weight = soft_weight
        self._factors = {}
        self._build_pattern()
        self.fixed_xy = _collect_fixed(bspec, self.lms, self.n)
        self._check_dirichlet()
        self._check_kernel()
        self._prepare_constraints()

    # pattern ----------------------------------------------------------------
    def _build_pattern(self):
        f = self.chart.faces
        n = self.n
        rows = np.repeat(f, 3, axis=1).ravel()
        cols = np.tile(f, (1, 3)).ravel()
        key = rows * n + cols
        uniq, inv = np.unique(key, return_inverse=True)
        self._inv = inv
        self._nnz = len(uniq)
        r, c = uniq // n, uniq % n
        self._indices = c.astype(np.int32)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=n))]).astype(np.int32)
        self._rows = r
        self._diag_pos = np.flatnonzero(r == c)
        A, B, area = self.coeffs.A, self.coeffs.B, self.coeffs.area
        # per-face 3x3 blocks, flattened row-major to match rows/cols above
        self._AA = (area[:, None, None] * A[:, :, None] * A[:, None, :]).reshape(len(f), 9)
        self._AB = (area[:, None, None] * (A[:, :, None] * B[:, None, :]
                                           + B[:, :, None] * A[:, None, :])).reshape(len(f), 9)
        self._BB = (area[:, None, None] * B[:, :, None] * B[:, None, :]).reshape(len(f), 9)
        if self.bspec.coupled:
            det = (area[:, None, None] * (A[:, :, None] * B[:, None, :]
                                          - B[:, :, None] * A[:, None, :])).reshape(len(f), 9)
            self._C = self._from_data(np.bincount(inv, weights=det.ravel(), minlength=self._nnz))

    def _from_data(self, data) -> sparse.csr_matrix:
        return sparse.csr_matrix((data, self._indices, self._indptr), shape=(self.n, self.n))

    def stiffness(self, alpha: beltrami.AlphaField) -> sparse.csr_matrix:
        vals = (alpha.alpha1[:, None] * self._AA + alpha.alpha2[:, None] * self._AB
                + alpha.alpha3[:, None] * self._BB)
        return self._from_data(np.bincount(self._inv, weights=vals.ravel(), minlength=self._nnz))

    @property
    def coupling(self) -> sparse.csr_matrix:
        """C with u^T C v = sum over faces of area * det Df (antisymmetric)."""
        if not self.bspec.coupled:
            raise AttributeError("coupling matrix only exists for the free and disk_circle families")
        return self._C

    # checks -----------------------------------------------------------------
    def _check_dirichlet(self):
        if self.bspec.family == "dirichlet_full":
            bv = self.chart.mesh.boundary_vertices
            missing = [int(v) for v in bv if v not in self.fixed_xy[0] or v not in self.fixed_xy[1]]
            if missing:
                raise ConstraintError(f"dirichlet_full leaves {len(missing)} boundary vertices free")

    def _check_kernel(self):
        adj = sparse.csr_matrix((np.ones(len(self._rows)), (self._rows, self._indices)),
                                shape=(self.n, self.n))
        used = np.zeros(self.n, bool)
        used[self.chart.faces.ravel()] = True
        ncomp, label = connected_components(adj, directed=False)
        soft = set(int(v) for v in self.lms.vertices("soft"))
        if self.bspec.coupled:
            full = set(self.fixed_xy[0]) & set(self.fixed_xy[1]) | soft
            need, what = (3, "circle sliding") if self.bspec.family == "disk_circle" else (2, "a free boundary")
            for comp in np.unique(label[used]):
                pts = [v for v in full if label[v] == comp]
                if len(pts) < need:
                    raise KernelError(f"constraints insufficient: {what} needs at least {need} "
                                      "landmark points per connected component")
            return
        for axis in (0, 1):
            anchored = set(self.fixed_xy[axis]) | soft
            for comp in np.unique(label[used]):
                if not any(label[v] == comp for v in anchored):
                    raise KernelError(
                        f"constraints insufficient: {'xy'[axis]}-coordinate has a translation "
                        "kernel (no fixed vertex)")

    def _prepare_constraints(self):
        n = self.n
        self._systems = []
        soft_v = self.lms.vertices("soft")
        soft_t = self.lms.targets("soft")
        soft_w = np.array([lm.weight for lm in self.lms.soft])
        if self.soft_weight is not None:
            soft_w = np.full(len(soft_v), float(self.soft_weight))
        full = set(self.fixed_xy[0]) | set(self.fixed_xy[1])
        self._circle = np.array([v for v in np.unique(self.bspec.circle) if int(v) not in full],
                                dtype=np.int64)
        if len(self._circle) and not (0 <= self._circle.min() and self._circle.max() < n):
            raise ConstraintError("circle vertex out of range")
        if self.bspec.coupled:
            idx = np.array(sorted(self.fixed_xy[0]), dtype=np.int64)
            idy = np.array(sorted(self.fixed_xy[1]), dtype=np.int64)
            # circle vertices: slot v holds the normal coordinate, fixed to radius 1
            fidx = np.concatenate([idx, idy + n, self._circle])
            fval = np.concatenate([[self.fixed_xy[0][v] for v in idx], [self.fixed_xy[1][v] for v in idy],
                                   np.ones(len(self._circle))])
            self._systems.append((fidx, fval, np.concatenate([soft_v, soft_v + n]),
                                  np.concatenate([soft_w, soft_w]),
                                  np.concatenate([soft_t.real, soft_t.imag])))
        else:
            for axis in (0, 1):
                fi = np.array(sorted(self.fixed_xy[axis]), dtype=np.int64)
                fv = np.array([self.fixed_xy[axis][v] for v in fi], dtype=float)
                tgt = soft_t.real if axis == 0 else soft_t.imag
                self._systems.append((fi, fv, soft_v, soft_w, tgt))

    # assembly ---------------------------------------------------------------
    def assemble(self, mu, angles=None) -> LinearSystem:
        return self.assemble_alpha(beltrami.alpha_coeffs(mu), angles)

    def frame(self, angles=None) -> sparse.csr_matrix | None:
        """Orthogonal change of variables (normal, tangent) -> (x, y) at circle vertices.

        ``angles`` gives the current angle of every vertex (default: the chart).
        """
        cv = self._circle
        if not len(cv):
            return None
        n = self.n
        th = np.angle(self.chart.z[cv]) if angles is None else np.asarray(angles, float)[cv]
        c, s = np.cos(th), np.sin(th)
        rest = np.setdiff1d(np.arange(2 * n), np.concatenate([cv, cv + n]))
        rows = np.concatenate([rest, cv, cv, cv + n, cv + n])
        cols = np.concatenate([rest, cv, cv + n, cv, cv + n])
        vals = np.concatenate([np.ones(len(rest)), c, -s, s, c])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))

    def assemble_alpha(self, alpha: beltrami.AlphaField, angles=None) -> LinearSystem:
        M = self.stiffness(alpha)
        Q = None
        if self.bspec.coupled:
            C = self._C
            base = sparse.bmat([[M, -C], [-C.T, M]], format="csr")
            Q = self.frame(angles)
            if Q is not None:
                base = (Q.T @ base @ Q).tocsr()
        else:
            base = M
        scale = float(M.diagonal().mean())
        mats, rhss, fixed, pen = [], [], [], []
        for fi, fv, sv, sw, st in self._systems:
            N = base.shape[0]
            keep = np.ones(N, bool)
            keep[fi] = False
            g = np.zeros(N)
            g[fi] = fv
            b = -(base @ g)
            A = base.tocoo()
            mask = keep[A.row] & keep[A.col]
            w_abs = sw * scale
            diag = np.zeros(N)
            diag[fi] = 1.0
            if len(sv):
                free_soft = keep[sv]
                np.add.at(diag, sv[free_soft], w_abs[free_soft])
                pull = np.zeros(N)
                np.add.at(pull, sv[free_soft], (w_abs * st)[free_soft])
                # the penalty is isotropic per vertex, so only its right-hand side rotates
                b += pull if Q is None else Q.T @ pull
            K = sparse.csr_matrix((A.data[mask], (A.row[mask], A.col[mask])), shape=(N, N))
            K = (K + sparse.diags(diag)).tocsr()
            b[~keep] = 0.0
            b[fi] = fv
            mats.append(K)
            rhss.append(b)
            fixed.append((fi, fv))
            pen.append((sv, w_abs))
        return LinearSystem(M, mats, rhss, fixed, pen, self.bspec.coupled, alpha.clamped, Q)

    # solve ------------------------------------------------------------------
    def solve(self, mu=None, x0=None, tol: float = 1e-10, max_cg_iters: int | None = None):
        m = self.chart.n_faces
        mu = np.zeros(m, complex) if mu is None else np.asarray(mu, dtype=complex)
        if mu.shape != (m,):
            raise ValueError(f"Beltrami field has {mu.shape[0]} values for {m} faces")
        n = self.n
        w0 = None if x0 is None else beltrami.as_complex(x0)
        system = self.assemble(mu, None if w0 is None else np.angle(w0))
        stats = SolveStats(clamp_count=system.clamp_count)
        Q = system.rotation
        if w0 is None:
            guess = [None] * len(system.rhs)
        elif system.coupled:
            g = np.concatenate([w0.real, w0.imag])
            guess = [g if Q is None else Q.T @ g]
        else:
            guess = [w0.real, w0.imag]
        sols = []
        for k, (K, b, x) in enumerate(zip(system.constrained, system.rhs, guess)):
            budget = max_cg_iters or 10 * K.shape[0]
            if k in self._factors:
                try:
                    sol, its, res = _pcg(K, b, x, tol, min(budget, LAGGED_BUDGET), self._factors[k])
                except SolverError:
                    # the matrix drifted too far from the lagged factor
                    stats.cg_iterations += min(budget, LAGGED_BUDGET)
                    del self._factors[k]
            if k not in self._factors:
                self._factors[k] = _factor(K)
                sol, its, res = _pcg(K, b, x, tol, budget, self._factors[k])
            if its > REFACTOR_ITERS:
                del self._factors[k]
            stats.cg_iterations += its
            stats.final_residual = max(stats.final_residual, res)
            stats.systems += 1
            sols.append(sol)
        if system.coupled:
            x = sols[0] if Q is None else Q @ sols[0]
            w = x[:n] + 1j * x[n:]
            cv = self._circle
            w[cv] /= np.abs(w[cv])
        else:
            w = sols[0] + 1j * sols[1]
        return w, stats


def _factor(K: sparse.csr_matrix) -> LinearOperator:
    """Sparse LU of an SPD matrix, wrapped as a CG preconditioner."""
    d = K.diagonal()
    if (d <= 0).any():
        raise SolverError("system matrix has a non-positive diagonal entry")
    # a bandwidth-reducing pre-order keeps the minimum-degree fill well structured on
    # meshes whose vertex numbering is scattered (subdivided spheres in particular)
    perm = reverse_cuthill_mckee(K.tocsr(), symmetric_mode=True)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    try:
        lu = splu(K[perm][:, perm].tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError(f"system matrix is singular ({exc})") from None
    return LinearOperator(K.shape, matvec=lambda r: lu.solve(np.ravel(r)[perm])[inv], dtype=float)


def _pcg(K, b, x0, tol, maxiter, M=None):
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0, 0.0
    if M is None:
        M = _factor(K)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = cg(K, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    res = float(np.linalg.norm(b - K @ x) / bnorm)
    if info != 0 or not np.isfinite(res):
        raise SolverError(f"CG did not converge in {maxiter} iterations (relative residual {res:.3e})")
    return x, count[0], res


# ----------------------------------------------------------------- functional API

def assemble(chart, alpha_or_mu, coeffs=None, bspec: BoundarySpec | None = None,
             lms: LandmarkSet | None = None) -> LinearSystem:
    """Build the constrained LBS systems from a Beltrami field or an AlphaField."""
    if bspec is None:
        raise ConstraintError("constraints insufficient: no boundary specification")
    prob = LBSProblem(chart, bspec, lms)
    if isinstance(alpha_or_mu, beltrami.AlphaField):
        return prob.assemble_alpha(alpha_or_mu)
    return prob.assemble(alpha_or_mu)


def solve_lbs(chart, mu, bspec: BoundarySpec, lms: LandmarkSet | None = None,
              tol: float = 1e-10, max_cg_iters: int | None = None, x0=None,
              soft_weight: float | None = None):
    """Map with Beltrami coefficient (as close as the constraints allow to) ``mu``.

    Returns the per-vertex complex image and :class:`SolveStats`.
    """
    prob = LBSProblem(chart, bspec, lms, soft_weight=soft_weight)
    return prob.solve(mu, x0=x0, tol=tol, max_cg_iters=max_cg_iters)


def solve_boundary_value(chart, bspec: BoundarySpec, lms: LandmarkSet | None = None, **kw):
    """The mu = 0 solve used to initialise the iteration."""
    return solve_lbs(chart, None, bspec, lms, **kw)
