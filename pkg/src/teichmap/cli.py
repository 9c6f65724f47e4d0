"""Command-line interface: topology checks, flattening, LBS solves, registration, reports.

Exit codes: 0 success, 2 iteration did not converge (artifacts still written),
1 hard failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import beltrami, lbs, qc
from .mesh import MeshError, TriMesh, load_mesh, save_mesh_with_uv, validate_topology, SUPPORTED
from .parameterize import (ChartError, default_corners, disk_chart, harmonic_disk, harmonic_rect,
                           is_planar, normalize_sphere, planar_chart)

logger = logging.getLogger("teichmap")

SCHEMA_VERSION = "teichmap-report/1"
EXIT_OK, EXIT_FAIL, EXIT_NOT_CONVERGED = 0, 1, 2
UNIFORMITY_THRESHOLD = 0.05

_num = {"type": "number"}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema", "inputs", "config", "classification", "iterations", "converged",
                 "final", "landmarks", "flip_count", "clamp_count", "energy", "timings",
                 "histogram", "trace", "content_hash"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "inputs": {"type": "array", "items": {
            "type": "object", "required": ["path", "sha256"],
            "properties": {"path": {"type": "string"}, "sha256": {"type": "string"}}}},
        "config": {"type": "object"},
        "classification": {"type": "string"},
        "iterations": {"type": "integer", "minimum": 0},
        "stages": {"type": "integer", "minimum": 1},
        "converged": {"type": "boolean"},
        "final": {"type": "object", "required": ["mean", "std", "sup", "K"],
                  "properties": {k: _num for k in ("mean", "std", "sup", "K")}},
        "landmarks": {"type": "object", "required": ["max_hard", "max_soft"],
                      "properties": {"max_hard": _num, "max_soft": _num}},
        "flip_count": {"type": "integer", "minimum": 0},
        "clamp_count": {"type": "integer", "minimum": 0},
        "energy": {"type": "object", "required": ["start", "end"],
                   "properties": {"start": _num, "end": _num}},
        "timings": {"type": "object", "additionalProperties": _num},
        "histogram": {"type": "string"},
        "trace": {"type": "string"},
        "content_hash": {"type": "string"},
    },
}


class CliError(RuntimeError):
    pass


# ----------------------------------------------------------------- landmark files

@dataclass
class LandmarkEntry:
    kind: str                 # "s" (vertex pair), "p" (positional) or "c" (curve)
    src: list
    dst: list = field(default_factory=list)   # vertex indices for s/c
    uv: tuple | None = None
    mode: str = "hard"
    weight: float = lbs.DEFAULT_SOFT_WEIGHT
    line: int = 0


def parse_landmark_file(path) -> list[LandmarkEntry]:
    """Read the landmark text format.

    ``s <src> <dst>`` pairs a source vertex with a destination vertex,
    ``p <src> <u> <v>`` sends a source vertex to a point, and
    ``c <a,b,...> <x,y,...>`` matches two vertex chains by arc length.
    Any line may end in ``soft <weight>``; ``#`` starts a comment.
    """
    out = []
    for no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        text = raw.split("#", 1)[0].split()
        if not text:
            continue
        mode, weight = "hard", lbs.DEFAULT_SOFT_WEIGHT
        if len(text) >= 2 and text[-2] == "soft":
            mode = "soft"
            try:
                weight = float(text[-1])
            except ValueError:
                raise CliError(f"{path}:{no}: soft weight {text[-1]!r} is not a number") from None
            text = text[:-2]
        try:
            kind = text[0]
            if kind == "s" and len(text) == 3:
                out.append(LandmarkEntry("s", [int(text[1])], [int(text[2])], mode=mode,
                                         weight=weight, line=no))
            elif kind == "p" and len(text) == 4:
                out.append(LandmarkEntry("p", [int(text[1])], uv=(float(text[2]), float(text[3])),
                                         mode=mode, weight=weight, line=no))
            elif kind == "c" and len(text) == 3:
                a = [int(v) for v in text[1].split(",")]
                b = [int(v) for v in text[2].split(",")]
                if len(a) < 2 or len(b) < 2:
                    raise CliError(f"{path}:{no}: a curve needs at least 2 vertices per side")
                out.append(LandmarkEntry("c", a, b, mode=mode, weight=weight, line=no))
            else:
                raise CliError(f"{path}:{no}: cannot parse landmark line {raw.strip()!r}")
        except ValueError:
            raise CliError(f"{path}:{no}: cannot parse landmark line {raw.strip()!r}") from None
    return out



def _chain_targets(entry: LandmarkEntry, src_pts: np.ndarray, dst_pts: np.ndarray) -> np.ndarray:
    """Arc-length correspondence of a source chain onto a destination polyline."""
    a = src_pts[entry.src]
    seg = np.linalg.norm(np.diff(a, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    s = s / s[-1] if s[-1] > 0 else np.linspace(0, 1, len(a))
    b = dst_pts[entry.dst]
    segb = np.linalg.norm(np.diff(b, axis=0), axis=1)
    sb = np.concatenate([[0.0], np.cumsum(segb)])
    t = s * sb[-1]
    return np.column_stack([np.interp(t, sb, b[:, k]) for k in range(b.shape[1])])


def _check_range(entries, n_src, n_dst=None):
    for e in entries:
        for v in e.src:
            if not 0 <= v < n_src:
                raise CliError(f"landmark line {e.line}: source vertex {v} out of range [0, {n_src})")
        if n_dst is not None:
            for v in e.dst:
                if not 0 <= v < n_dst:
                    raise CliError(f"landmark line {e.line}: destination vertex {v} out of range")


def planar_landmarks(entries, n_src, dst_uv: np.ndarray | None = None,
                     src_pts: np.ndarray | None = None) -> lbs.LandmarkSet:
    """Landmarks with planar targets; ``s``/``c`` forms read the destination's coordinates."""
    _check_range(entries, n_src, None if dst_uv is None else len(dst_uv))
    out = lbs.LandmarkSet()
    for e in entries:
        if e.kind == "p":
            targets = [complex(*e.uv)]
            verts = e.src
        else:
            if dst_uv is None:
                raise CliError(f"landmark line {e.line}: '{e.kind}' form needs a destination mesh")
            if e.kind == "s":
                verts, targets = e.src, [complex(*dst_uv[e.dst[0]])]
            else:
                pts = _chain_targets(e, src_pts, dst_uv)
                verts, targets = e.src, [complex(x, y) for x, y in pts]
        for v, t in zip(verts, targets):
            try:
                out.add(lbs.Landmark(int(v), t, e.mode, e.weight))
            except (ValueError, lbs.ConstraintError) as exc:
                raise CliError(f"landmark line {e.line}: {exc}") from None
    return out


def _snap_to_circle(lms: lbs.LandmarkSet, on_boundary, tol: float = 1e-3) -> lbs.LandmarkSet:
    """Boundary landmark targets moved radially onto the unit circle (text files round them)."""
    out = lbs.LandmarkSet()
    for lm in lms:
        t = lm.target
        if on_boundary[lm.vertex]:
            if abs(abs(t) - 1) > tol:
                raise CliError(f"boundary landmark at vertex {lm.vertex} targets |w| = {abs(t):.6g}, "
                               "not the unit circle")
            t = t / abs(t)
        out.add(lbs.Landmark(lm.vertex, t, lm.mode, lm.weight))
    return out


def sphere_landmarks(entries, src_pts, dst_pts) -> list:
    _check_range(entries, len(src_pts), len(dst_pts))
    pairs = []
    for e in entries:
        if e.mode != "hard":
            raise CliError(f"landmark line {e.line}: soft landmarks are not supported on spheres")
        if e.kind == "s":
            pairs.append((e.src[0], e.dst[0]))
        elif e.kind == "c":
            for v, t in zip(e.src, _chain_targets(e, src_pts, dst_pts)):
                pairs.append((v, t))
        else:
            raise CliError(f"landmark line {e.line}: positional landmarks need a planar target")
    return pairs


# ----------------------------------------------------------------- helpers

def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def content_hash(report: dict) -> str:
    """Hash of everything except timings and the hash itself."""
    body = {k: v for k, v in report.items() if k not in ("timings", "content_hash")}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()


def _finite(x: float) -> float:
    x = float(x)
    return x if np.isfinite(x) else float(np.finfo(float).max)


def build_report(result: qc.QCResult, inputs, config: dict, classification: str,
                 timings: dict, hist_path, trace_path, lms: lbs.LandmarkSet | None = None) -> dict:
    st = result.stats
    sup = min(st.sup, beltrami.MU_LIMIT)
    soft = lms.residuals(result.map, "soft") if lms is not None and len(lms.soft) else np.zeros(0)
    rows = result.trace.rows()
    report = {
        "schema": SCHEMA_VERSION,
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "config": config,
        "classification": classification,
        "iterations": int(result.iterations),
        "stages": int(result.stages),
        "converged": bool(result.converged),
        "final": {"mean": _finite(st.mean), "std": _finite(st.std), "sup": _finite(st.sup),
                  "K": _finite(beltrami.dilation(np.array([sup])))},
        "landmarks": {"max_hard": _finite(result.lm_residual),
                      "max_soft": _finite(soft.max() if len(soft) else 0.0)},
        "flip_count": int(result.flip_count),
        "clamp_count": int(result.clamp_count),
        "energy": {"start": _finite(rows[0].E2 if rows else 0.0),
                   "end": _finite(rows[-1].E2 if rows else 0.0)},
        "timings": {k: float(v) for k, v in timings.items()},
        "histogram": str(hist_path),
        "trace": str(trace_path),
    }
    report["content_hash"] = content_hash(report)
    return report


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def load_report(path) -> dict:
    try:
        report = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: schema error: not valid JSON ({exc.msg})") from None
    try:
        validate_report(report)
    except jsonschema.ValidationError as exc:
        raise CliError(f"{path}: schema error: {exc.message}") from None
    return report


def summary_lines(report: dict) -> list[str]:
    f = report["final"]
    ratio = f["std"] / f["mean"] if f["mean"] > 1e-12 else 0.0
    verdict = "PASS" if ratio < UNIFORMITY_THRESHOLD else "FAIL"
    t = report["timings"]
    return [
        f"classification : {report['classification']}",
        f"k = mean|nu|   : {f['mean']:.6f}",
        f"std|nu|        : {f['std']:.6f}  (std/mean {ratio:.4f})",
        f"sup|nu|        : {f['sup']:.6f}",
        f"K              : {f['K']:.6f}",
        f"energy E2      : {report['energy']['start']:.6g} -> {report['energy']['end']:.6g}",
        f"iterations     : {report['iterations']} ({'converged' if report['converged'] else 'not converged'})",
        f"flips / clamps : {report['flip_count']} / {report['clamp_count']}",
        f"landmarks      : hard {report['landmarks']['max_hard']:.3g}, soft {report['landmarks']['max_soft']:.3g}",
        f"time           : {t.get('total', sum(t.values())):.3f} s",
        f"Teichmüller criterion: {verdict}",
    ]


def _planar_source_chart(mesh: TriMesh, kind: str, corners=None):
    rep = validate_topology(mesh)
    if kind == "sphere":
        if rep.classification != "closed genus-0":
            raise CliError(f"--boundary sphere needs a closed genus-0 mesh, got {rep.describe()}")
        return None, rep
    if rep.classification not in SUPPORTED or rep.classification == "closed genus-0":
        raise CliError(f"--boundary {kind} needs an open mesh, got {rep.describe()}")
    if kind == "rect":
        if rep.classification != "simply-connected open":
            raise CliError(f"--boundary rect needs a simply-connected open mesh, got {rep.describe()}")
        return harmonic_rect(mesh, corners or default_corners(mesh)), rep
    if kind == "disk":
        if rep.classification != "simply-connected open":
            raise CliError(f"--boundary disk needs a simply-connected open mesh, got {rep.describe()}")
        if is_planar(mesh):
            r = np.abs(mesh.vertices[mesh.boundary_vertices, 0] + 1j * mesh.vertices[mesh.boundary_vertices, 1])
            if np.abs(r - 1).max() < 1e-9:
                return disk_chart(mesh), rep
        return harmonic_disk(mesh), rep
    # dirichlet / free: use the mesh itself when flat, a disk chart otherwise
    if is_planar(mesh):
        return planar_chart(mesh), rep
    if rep.classification != "simply-connected open":
        raise CliError("a curved multiply-connected mesh needs a planar chart; flatten it first")
    return harmonic_disk(mesh), rep


def _parse_domain(spec: str | None):
    """``rect W H`` shorthand or a mesh path; returns ("rect", W, H), ("mesh", TriMesh, path) or None."""
    if spec is None:
        return None
    parts = spec.split()
    if parts and parts[0] == "rect":
        if len(parts) != 3:
            raise CliError("domain shorthand is 'rect W H'")
        w, h = float(parts[1]), float(parts[2])
        if not (w > 0 and h > 0):
            raise CliError("rectangle width and height must be positive")
        return ("rect", w, h)
    return ("mesh", load_mesh(spec), spec)


def _write_outputs(prefix: Path, mesh: TriMesh, uv, result: qc.QCResult):
    prefix.parent.mkdir(parents=True, exist_ok=True)
    obj = prefix.with_name(prefix.name + ".obj")
    trace = prefix.with_name(prefix.name + "_trace.csv")
    hist = prefix.with_name(prefix.name + "_hist.csv")
    save_mesh_with_uv(mesh, uv, obj)
    result.trace.write_csv(trace)
    beltrami.write_histogram_csv(result.stats, hist)
    return obj, trace, hist


def _sphere_uv(points: np.ndarray) -> np.ndarray:
    """Equirectangular texture coordinates of unit-sphere points."""
    lon = np.arctan2(points[:, 1], points[:, 0])
    lat = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
    return np.column_stack([(lon + np.pi) / (2 * np.pi), 1.0 - lat / np.pi])


# ----------------------------------------------------------------- commands

def cmd_check(args) -> int:
    mesh = load_mesh(args.mesh)
    rep = validate_topology(mesh)
    print(f"{args.mesh}: {rep.describe()}")
    print(json.dumps(rep.to_dict() | {"boundary_loop_lengths": [len(l) for l in rep.boundary_loops]},
                     indent=2))
    return EXIT_OK if rep.classification in SUPPORTED else EXIT_FAIL


def cmd_flatten(args) -> int:
    mesh = load_mesh(args.mesh)
    chart, rep = _planar_source_chart(mesh, args.domain)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_mesh_with_uv(mesh, chart.coords, out)
    print(f"{rep.describe()} -> {chart.kind} chart, {chart.flip_count()} flipped faces")
    print(f"wrote {out}")
    return EXIT_OK


def _parse_mu(text: str) -> complex:
    try:
        mu = complex(text.replace(" ", ""))
    except ValueError:
        raise CliError(f"cannot parse Beltrami coefficient {text!r}") from None
    if abs(mu) >= 1:
        raise CliError("|mu| must be below 1")
    return mu


def cmd_solve(args) -> int:
    """One LBS solve with a constant Beltrami coefficient."""
    mesh = load_mesh(args.mesh)
    chart, rep = _planar_source_chart(mesh, args.boundary)
    mu = np.full(chart.n_faces, _parse_mu(args.mu))
    entries = parse_landmark_file(args.landmarks) if args.landmarks else []
    lms = planar_landmarks(entries, mesh.n_vertices)
    bspec = _planar_bspec(args.boundary, chart, lms, None)
    w, st = lbs.solve_lbs(chart, mu, bspec, lms, tol=args.cg_tol, soft_weight=args.soft_weight)
    nu = beltrami.beltrami_of_map(chart, w)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_mesh_with_uv(mesh, w, out)
    print(f"cg iterations {st.cg_iterations}, residual {st.final_residual:.3e}, "
          f"max |mu(f) - mu| {np.abs(nu - mu).max():.3e}, flips {beltrami.flip_count(chart, w)}")
    print(f"wrote {out}")
    return EXIT_OK


def _planar_bspec(kind, chart, lms, domain):
    if kind == "rect":
        w, h = (domain[1], domain[2]) if domain and domain[0] == "rect" else (1.0, 1.0)
        return lbs.rectangle_sliding(chart, width=w, height=h)
    if kind == "free":
        return lbs.free_boundary()
    if kind == "dirichlet":
        if domain is None:
            return lbs.dirichlet_full(chart)
        if domain[0] != "mesh":
            raise CliError("--boundary dirichlet needs a destination mesh with the same vertices")
        dst = domain[1]
        if dst.n_vertices != chart.n_vertices:
            raise CliError("destination mesh must have the same vertex count as the source")
        return lbs.dirichlet_full(chart, dst.vertices[:, :2])
    if kind == "disk":
        return lbs.disk_circle(chart)
    raise CliError(f"unknown boundary kind {kind!r}")


def _config(args, cfg: qc.IterationConfig) -> dict:
    keep = ("boundary", "disk_method", "seed", "width", "height", "domain")
    return {"iteration": cfg.to_dict(), **{k: getattr(args, k) for k in keep if hasattr(args, k)}}


def run_registration(args, src_path, dst_spec, lm_path, boundary) -> int:
    t_start = time.perf_counter()
    timings = {}
    src = load_mesh(src_path)
    domain = _parse_domain(dst_spec)
    timings["load"] = time.perf_counter() - t_start
    cfg = qc.IterationConfig(eps=args.eps, max_iters=args.max_iter, pole_band=args.pole_band,
                             soft_weight=args.soft_weight, disk_band=args.disk_band,
                             max_outer=args.max_outer)
    inputs = [src_path] + ([dst_spec] if domain and domain[0] == "mesh" else []) \
        + ([lm_path] if lm_path else [])
    entries = parse_landmark_file(lm_path) if lm_path else []
    t = time.perf_counter()
    chart, rep = _planar_source_chart(src, boundary)
    timings["chart"] = time.perf_counter() - t
    t = time.perf_counter()
    lms = None
    if boundary == "sphere":
        if domain is None or domain[0] != "mesh":
            raise CliError("--boundary sphere needs a destination sphere mesh")
        dst = domain[1]
        drep = validate_topology(dst)
        if drep.classification != "closed genus-0":
            raise CliError(f"destination must be a closed genus-0 mesh, got {drep.describe()}")
        pairs = sphere_landmarks(entries, normalize_sphere(src.vertices), normalize_sphere(dst.vertices))
        result = qc.qc_iterate_sphere(src, dst, pairs, cfg)
        uv = _sphere_uv(result.map)
        out_mesh = src.with_vertices(result.map)
    else:
        dst_uv = None
        if domain and domain[0] == "mesh":
            dst_uv = domain[1].vertices[:, :2]
        lms = planar_landmarks(entries, src.n_vertices, dst_uv, chart.coords)
        if any(abs(l.target.real - 0.5) > 0.5 or abs(l.target.imag - 0.5) > 0.5 for l in lms) \
                and args.command == "texture":
            logger.warning("landmark UV outside [0,1]^2; the image domain is unbounded")
        if boundary == "disk":
            lms = _snap_to_circle(lms, src.is_boundary_vertex)
            if args.disk_method == "alternate":
                result = qc.qc_iterate_disk_alternating(chart, lms, cfg)
            elif args.disk_method == "pinned":
                result = qc.qc_iterate_open(chart, qc.disk_pinned_spec(chart, lms), lms, cfg)
            else:
                result = qc.qc_iterate_open(chart, lbs.disk_circle(chart), lms, cfg)
        else:
            bspec = _planar_bspec(boundary, chart, lms, domain)
            result = qc.qc_iterate_open(chart, bspec, lms, cfg)
        uv = result.map
        out_mesh = src
    timings["iterate"] = time.perf_counter() - t
    t = time.perf_counter()
    prefix = Path(args.out_prefix)
    obj, trace, hist = _write_outputs(prefix, out_mesh, uv, result)
    timings["write"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start
    report = build_report(result, inputs, _config(args, cfg), rep.describe(), timings, hist, trace, lms)
    validate_report(report)
    rpath = prefix.with_name(prefix.name + "_report.json")
    rpath.write_text(json.dumps(report, indent=2) + "\n")
    f = report["final"]
    print(f"k = {f['mean']:.6f}  std = {f['std']:.6f}  K = {f['K']:.6f}  "
          f"flip_count = {report['flip_count']}  iterations = {report['iterations']}  "
          f"({'converged' if result.converged else 'NOT converged'})")
    for p in (obj, rpath, trace, hist):
        print(f"wrote {p}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_teich(args) -> int:
    if args.boundary in ("free", "disk") and not args.landmarks:
        raise CliError("constraints insufficient: a free boundary needs a landmark file")
    return run_registration(args, args.src, args.dst, args.landmarks, args.boundary)


def cmd_texture(args) -> int:
    domain = args.domain
    boundary = "rect" if domain and domain.split()[0] == "rect" else "free"
    if boundary == "free" and not args.landmarks:
        raise CliError("constraints insufficient: texture mapping needs UV landmarks")
    return run_registration(args, args.mesh, domain, args.landmarks, boundary)


def cmd_report(args) -> int:
    report = load_report(args.report)
    for line in summary_lines(report):
        print(line)
    return EXIT_OK


# ----------------------------------------------------------------- parser

def _add_iteration_flags(p):
    p.add_argument("--landmarks", help="landmark file")
    p.add_argument("--eps", type=float, default=1e-4, help="stop when max |nu_{n+1} - nu_n| < eps")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--max-outer", type=int, default=20, help="alternation stages (disk, sphere)")
    p.add_argument("--soft-weight", type=float, default=lbs.DEFAULT_SOFT_WEIGHT)
    p.add_argument("--pole-band", type=float, default=0.99)
    p.add_argument("--disk-band", type=float, default=0.5, help="frozen radius around a disk cut")
    p.add_argument("--disk-method", choices=("alternate", "circle", "pinned"), default="alternate")
    p.add_argument("--out-prefix", default="teichmap_out")
    p.add_argument("--seed", type=int, default=0, help="recorded in the report; runs are deterministic")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teichmap", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="report mesh topology")
    p.add_argument("mesh")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("flatten", help="harmonic map onto the unit square or disk")
    p.add_argument("mesh")
    p.add_argument("--domain", choices=("rect", "disk"), default="disk")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flatten)

    p = sub.add_parser("solve", help="one linear Beltrami solve with constant mu")
    p.add_argument("mesh")
    p.add_argument("--mu", required=True, help="complex value such as 0.3+0.1j")
    p.add_argument("--boundary", choices=("dirichlet", "rect", "free"), default="rect")
    p.add_argument("--landmarks")
    p.add_argument("--soft-weight", type=float, default=None)
    p.add_argument("--cg-tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("teich", help="Teichmueller registration")
    p.add_argument("src")
    p.add_argument("dst", nargs="?", help="destination mesh or 'rect W H'")
    p.add_argument("--boundary", choices=("dirichlet", "rect", "disk", "sphere", "free"),
                   default="dirichlet")
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_teich)

    p = sub.add_parser("texture", help="texture coordinates from UV landmarks")
    p.add_argument("mesh")
    p.add_argument("--domain", default=None, help="'rect W H' or a planar mesh (default: free plane)")
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_texture)

    p = sub.add_parser("report", help="summarise a report JSON")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, MeshError, ChartError, lbs.ConstraintError, lbs.SolverError,
            qc.BijectivityError, qc.EmptyBandError, beltrami.DegenerateMapError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
