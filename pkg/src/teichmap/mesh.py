"""Triangle-mesh data model, OBJ/OFF I/O and topology queries."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

DEGENERATE_RATIO = 1e-12


class MeshError(ValueError):
    """Base class for mesh loading and validation failures."""


class MeshParseError(MeshError):
    pass


class TopologyError(MeshError):
    pass


class DegenerateFaceError(MeshError):
    pass


def _face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    v0 = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - v0
    e2 = vertices[faces[:, 2]] - v0
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable oriented manifold triangle mesh.

    ``vertices`` is (n, 3); planar input given as (n, 2) is padded with z = 0.
    ``faces`` holds 0-based counterclockwise vertex triples.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv: np.ndarray | None = None
    name: str = ""
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise MeshError(f"vertices must be (n, 2) or (n, 3), got {v.shape}")
        if v.shape[1] == 2:
            v = np.column_stack([v, np.zeros(len(v))])
        f = np.asarray(self.faces)
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {f.shape}")
        f = f.astype(np.int64)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.uv is not None:
            uv = np.asarray(self.uv, dtype=float)
            if uv.shape != (len(v), 2):
                raise MeshError(f"uv must be ({len(v)}, 2), got {uv.shape}")
            uv.setflags(write=False)
            object.__setattr__(self, "uv", uv)
        if not self._validated:
            self._validate()

    def _validate(self):
        n = len(self.vertices)
        f = self.faces
        if len(f) == 0:
            raise MeshError("mesh has no faces")
        if f.min() < 0 or f.max() >= n:
            bad = int(np.flatnonzero((f < 0).any(1) | (f >= n).any(1))[0])
            raise MeshError(f"face {bad} references a vertex outside [0, {n})")
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        if repeated.any():
            raise DegenerateFaceError(
                f"face {int(np.flatnonzero(repeated)[0])} repeats a vertex")
        areas = _face_areas(self.vertices, f)
        small = areas < DEGENERATE_RATIO * areas.mean()
        if small.any():
            raise DegenerateFaceError(
                f"face {int(np.flatnonzero(small)[0])} has near-zero area")
        # directed half-edges must be unique, undirected edges used at most twice
        he = self.half_edges
        key = he[:, 0] * n + he[:, 1]
        uniq, counts = np.unique(key, return_counts=True)
        if (counts > 1).any():
            k = int(uniq[counts > 1][0])
            e = sorted((k // n, k % n))
            und = np.sort(he, axis=1)
            used = int(np.sum((und[:, 0] == e[0]) & (und[:, 1] == e[1])))
            if used > 2:
                raise TopologyError(f"non-manifold edge {tuple(e)} shared by {used} faces")
            raise TopologyError(f"inconsistent face orientation across edge {tuple(e)}")
        und = np.sort(he, axis=1)
        _, ucounts = np.unique(und[:, 0] * n + und[:, 1], return_counts=True)
        if (ucounts > 2).any():
            raise TopologyError("non-manifold edge shared by more than two faces")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def half_edges(self) -> np.ndarray:
        """(3m, 2) directed edges; row 3t+k is the edge leaving corner k of face t."""
        f = self.faces
        return np.stack([f, np.roll(f, -1, axis=1)], axis=2).reshape(-1, 2)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (i < j), sorted lexicographically."""
        return np.unique(np.sort(self.half_edges, axis=1), axis=0)

    @cached_property
    def edge_faces(self) -> np.ndarray:
        """(E, 2) faces adjacent to each edge of ``edges``; -1 marks the missing side."""
        n = self.n_vertices
        und = np.sort(self.half_edges, axis=1)
        key = und[:, 0] * n + und[:, 1]
        ekey = self.edges[:, 0] * n + self.edges[:, 1]
        pos = np.searchsorted(ekey, key)
        face_of = np.repeat(np.arange(self.n_faces), 3)
        out = np.full((len(ekey), 2), -1, dtype=np.int64)
        order = np.argsort(pos, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = pos[order][1:] != pos[order][:-1]
        out[pos[order][first], 0] = face_of[order][first]
        out[pos[order][~first], 1] = face_of[order][~first]
        return out

    @cached_property
    def interior_edge_faces(self) -> np.ndarray:
        ef = self.edge_faces
        return ef[ef[:, 1] >= 0]

    @cached_property
    def boundary_half_edges(self) -> np.ndarray:
        """Directed edges with no opposite twin, in face orientation."""
        n = self.n_vertices
        he = self.half_edges
        fwd = he[:, 0] * n + he[:, 1]
        rev = he[:, 1] * n + he[:, 0]
        return he[~np.isin(fwd, rev)]

    @cached_property
    def boundary_loops(self) -> list[np.ndarray]:
        """Ordered boundary cycles; the outer loop of a ccw disk runs ccw."""
        bhe = self.boundary_half_edges
        nxt: dict[int, int] = {}
        for a, b in bhe:
            a, b = int(a), int(b)
            if a in nxt:
                raise TopologyError(f"vertex {a} is a non-manifold boundary vertex")
            nxt[a] = b
        loops = []
        seen: set[int] = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            v = nxt[start]
            while v != start:
                if v in seen or v not in nxt:
                    raise TopologyError("boundary edges do not form simple cycles")
                loop.append(v)
                seen.add(v)
                v = nxt[v]
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        if not self.boundary_loops:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(self.boundary_loops))

    @cached_property
    def is_boundary_vertex(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    @cached_property
    def vertex_face_incidence(self) -> sparse.csr_matrix:
        """Sparse (n, m) 0/1 incidence matrix."""
        m = self.n_faces
        rows = self.faces.ravel()
        cols = np.repeat(np.arange(m), 3)
        return sparse.csr_matrix(
            (np.ones(3 * m), (rows, cols)), shape=(self.n_vertices, m))

    @cached_property
    def face_areas(self) -> np.ndarray:
        return _face_areas(self.vertices, self.faces)

    @cached_property
    def used_vertices(self) -> np.ndarray:
        return np.unique(self.faces)

    def one_ring_faces(self, vertex: int) -> list[int]:
        """Faces containing ``vertex``, in rotational (ccw) order."""
        if not 0 <= vertex < self.n_vertices:
            raise IndexError(f"vertex {vertex} out of range [0, {self.n_vertices})")
        inc = self.vertex_face_incidence
        ring = inc.indices[inc.indptr[vertex]:inc.indptr[vertex + 1]]
        if len(ring) == 0:
            return []
        # for face (v, a, b) in ccw order the next face around v starts with (v, b, .)
        spoke = {}
        for t in ring:
            f = list(self.faces[t])
            k = f.index(vertex)
            a, b = f[(k + 1) % 3], f[(k + 2) % 3]
            spoke[a] = (int(t), b)
        targets = {b for _, b in spoke.values()}
        starts = [a for a in spoke if a not in targets]
        a = starts[0] if starts else min(spoke)
        ordered = []
        while a in spoke and len(ordered) < len(ring):
            t, a = spoke[a]
            ordered.append(t)
        if len(ordered) != len(ring):
            # fan is not a single umbrella (should not happen on validated meshes)
            return sorted(int(t) for t in ring)
        return ordered

    def with_faces_removed(self, face_ids) -> "TriMesh":
        keep = np.ones(self.n_faces, dtype=bool)
        keep[np.asarray(face_ids, dtype=np.int64)] = False
        return TriMesh(self.vertices, self.faces[keep], uv=self.uv, name=self.name)

    def with_vertices(self, vertices, uv=None) -> "TriMesh":
        return TriMesh(vertices, self.faces, uv=uv, name=self.name, _validated=True)


@dataclass(frozen=True)
class TopologyReport:
    n_vertices: int
    n_edges: int
    n_faces: int
    euler: int
    n_components: int
    boundary_loops: list
    genus: int
    orientable: bool
    classification: str

    @property
    def n_boundary_loops(self) -> int:
        return len(self.boundary_loops)

    def describe(self) -> str:
        c = self.classification
        if c == "multiply-connected open":
            return f"{c} ({self.n_boundary_loops} loops)"
        return c

    def to_dict(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "faces": self.n_faces,
            "euler_characteristic": self.euler,
            "components": self.n_components,
            "boundary_loops": self.n_boundary_loops,
            "boundary_loop_lengths": [len(l) for l in self.boundary_loops],
            "genus": self.genus,
            "orientable": self.orientable,
            "classification": self.classification,
        }


SUPPORTED = ("closed genus-0", "simply-connected open", "multiply-connected open")


def validate_topology(mesh: TriMesh) -> TopologyReport:
    """Euler characteristic, boundary loops and a coarse topological class."""
    nv = len(mesh.used_vertices)
    ne = len(mesh.edges)
    nf = mesh.n_faces
    chi = nv - ne + nf
    loops = mesh.boundary_loops
    b = len(loops)
    adj = sparse.csr_matrix(
        (np.ones(len(mesh.edges)), (mesh.edges[:, 0], mesh.edges[:, 1])),
        shape=(mesh.n_vertices, mesh.n_vertices))
    _, labels = connected_components(adj, directed=False)
    n_comp = len(np.unique(labels[mesh.used_vertices]))
    genus = (2 - chi - b) // 2 if n_comp == 1 else -1
    # orientation consistency is enforced at construction
    orientable = True
    if n_comp != 1:
        cls = "unsupported"
    elif b == 0 and chi == 2:
        cls = "closed genus-0"
    elif b == 1 and chi == 1:
        cls = "simply-connected open"
    elif b >= 2 and chi == 2 - b:
        cls = "multiply-connected open"
    else:
        cls = "unsupported"
    return TopologyReport(nv, ne, nf, chi, n_comp, [l.tolist() for l in loops],
                          genus, orientable, cls)


def one_ring_faces(mesh: TriMesh, vertex: int) -> list[int]:
    return mesh.one_ring_faces(vertex)


# ---------------------------------------------------------------- file I/O

def _parse_obj(text: str, path: str):
    verts, uvs, faces, face_vt = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "v":
                verts.append([float(x) for x in tok[1:4]])
                if len(verts[-1]) < 2:
                    raise ValueError("vertex needs at least 2 coordinates")
            elif tok[0] == "vt":
                uvs.append([float(x) for x in tok[1:3]])
            elif tok[0] == "f":
                if len(tok) != 4:
                    raise MeshParseError(
                        f"{path}:{lineno}: face has {len(tok) - 1} vertices, "
                        f"only triangles are supported: {raw.strip()!r}")
                idx, tix = [], []
                for t in tok[1:]:
                    parts = t.split("/")
                    idx.append(int(parts[0]))
                    tix.append(int(parts[1]) if len(parts) > 1 and parts[1] else None)
                faces.append(idx)
                face_vt.append(tix)
        except MeshParseError:
            raise
        except (ValueError, IndexError) as exc:
            raise MeshParseError(f"{path}:{lineno}: malformed line {raw.strip()!r}") from exc
    nv = len(verts)
    f = np.array(faces, dtype=np.int64).reshape(-1, 3)
    f = np.where(f < 0, f + nv, f - 1)
    if len(verts) and any(len(v) == 2 for v in verts):
        verts = [v + [0.0] * (3 - len(v)) for v in verts]
    uv = None
    if uvs and all(all(t is not None for t in ft) for ft in face_vt):
        uvs_arr = np.array(uvs, dtype=float)
        uv = np.full((nv, 2), np.nan)
        consistent = True
        for fv, ft in zip(f, face_vt):
            for vi, ti in zip(fv, ft):
                ti = ti + len(uvs) if ti < 0 else ti - 1
                if np.isnan(uv[vi, 0]):
                    uv[vi] = uvs_arr[ti]
                elif not np.array_equal(uv[vi], uvs_arr[ti]):
                    consistent = False
        if not consistent or np.isnan(uv).any():
            logger.warning("%s: texture coordinates are not per-vertex; ignoring them", path)
            uv = None
    return np.array(verts, dtype=float).reshape(-1, 3), f, uv


def _parse_off(text: str, path: str):
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, raw, line))
    if not lines:
        raise MeshParseError(f"{path}: empty file")
    lineno, raw, head = lines[0]
    rest = lines[1:]
    if head.startswith("OFF"):
        extra = head[3:].split()
        if extra:
            rest = [(lineno, raw, " ".join(extra))] + rest
    else:
        raise MeshParseError(f"{path}:{lineno}: missing OFF header")
    if not rest:
        raise MeshParseError(f"{path}: missing counts line")
    lineno, raw, counts = rest[0]
    try:
        nv, nf = (int(x) for x in counts.split()[:2])
    except ValueError as exc:
        raise MeshParseError(f"{path}:{lineno}: malformed counts line {raw.strip()!r}") from exc
    body = rest[1:]
    if len(body) < nv + nf:
        raise MeshParseError(f"{path}: expected {nv} vertices and {nf} faces")
    verts, faces = [], []
    for lineno, raw, line in body[:nv]:
        try:
            xyz = [float(x) for x in line.split()[:3]]
        except ValueError as exc:
            raise MeshParseError(f"{path}:{lineno}: malformed vertex {raw.strip()!r}") from exc
        if len(xyz) < 3:
            raise MeshParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
        verts.append(xyz)
    for lineno, raw, line in body[nv:nv + nf]:
        tok = line.split()
        try:
            k = int(tok[0])
            idx = [int(x) for x in tok[1:1 + k]]
        except (ValueError, IndexError) as exc:
            raise MeshParseError(f"{path}:{lineno}: malformed face {raw.strip()!r}") from exc
        if k != 3 or len(idx) != 3:
            raise MeshParseError(
                f"{path}:{lineno}: face has {k} vertices, only triangles are supported")
        faces.append(idx)
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64).reshape(-1, 3), None


def load_mesh(path, format: str | None = None) -> TriMesh:
    """Read an OBJ or OFF triangle mesh; vertex order is preserved."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt not in ("obj", "off"):
        raise MeshParseError(f"{path}: unsupported mesh format {fmt!r}")
    text = path.read_text()
    parser = _parse_obj if fmt == "obj" else _parse_off
    v, f, uv = parser(text, str(path))
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise MeshParseError(f"{path}: face index out of range")
    return TriMesh(v, f, uv=uv, name=path.stem)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def save_mesh_with_uv(mesh: TriMesh, uv, path) -> None:
    """Write an OBJ with one ``vt`` per vertex (same index as ``v``)."""
    uv = np.asarray(uv)
    if uv.ndim == 1 and np.iscomplexobj(uv):
        uv = np.column_stack([uv.real, uv.imag])
    uv = uv.astype(float)
    if uv.shape != (mesh.n_vertices, 2):
        raise ValueError(
            f"uv has shape {uv.shape}, expected ({mesh.n_vertices}, 2)")
    lines = [f"# {mesh.n_vertices} vertices, {mesh.n_faces} faces"]
    lines += [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices]
    lines += [f"vt {_fmt(u)} {_fmt(v)}" for u, v in uv]
    lines += ["f " + " ".join(f"{i + 1}/{i + 1}" for i in face) for face in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def save_off(mesh: TriMesh, path) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [f"{_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")
