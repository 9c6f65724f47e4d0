import json
import re
from pathlib import Path

import numpy as np
import pytest

from teichmap import cli, meshgen
from teichmap.mesh import TriMesh, load_mesh, save_off


@pytest.fixture()
def workdir(tmp_path):
    sq = meshgen.grid_square(10)
    save_off(sq, tmp_path / "sq.off")
    save_off(sq.with_vertices(sq.vertices * [2, 1, 1]), tmp_path / "rect.off")
    d = meshgen.disk_mesh(6)
    save_off(d, tmp_path / "disk.off")
    loop = d.boundary_loops[0]
    lines = []
    for j, v in enumerate(loop[:: len(loop) // 6][:6]):
        th = np.angle(complex(*d.vertices[v, :2])) + 0.1 * np.sin(2 * j)
        lines.append(f"p {v} {np.cos(th):.9f} {np.sin(th):.9f}")
    (tmp_path / "disk_lm.txt").write_text("\n".join(lines) + "\n")
    save_off(meshgen.icosphere(2), tmp_path / "sph.off")
    save_off(meshgen.annulus_mesh(0.4, 1.0, 3, 24), tmp_path / "ann.off")
    t = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 0], [6, 5, 0], [5, 6, 0]], [[0, 1, 2], [3, 4, 5]])
    save_off(t, tmp_path / "two.off")
    return tmp_path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def written_paths(stdout):
    return [Path(m) for m in re.findall(r"^wrote (.+)$", stdout, flags=re.M)]


def test_landmark_file_forms(tmp_path):
    p = tmp_path / "lm.txt"
    p.write_text("# header\ns 1 2\np 3 0.5 0.25 soft 10\n\nc 4,5,6 7,8  # curve\n")
    e = cli.parse_landmark_file(p)
    assert [x.kind for x in e] == ["s", "p", "c"]
    assert e[1].mode == "soft" and e[1].weight == 10 and e[1].uv == (0.5, 0.25)
    assert e[2].src == [4, 5, 6] and e[2].dst == [7, 8]


@pytest.mark.parametrize("text, match", [
    ("q 1 2\n", "cannot parse"),
    ("p 1 x 2\n", "cannot parse"),
    ("c 1 2,3\n", "at least 2"),
    ("s 1 2 soft abc\n", "not a number"),
])
def test_landmark_file_errors(tmp_path, text, match):
    p = tmp_path / "lm.txt"
    p.write_text(text)
    with pytest.raises(cli.CliError, match=match):
        cli.parse_landmark_file(p)


def test_curve_landmarks_use_arc_length():
    entry = cli.LandmarkEntry("c", [0, 1, 2], [0, 1])
    src = np.array([[0, 0], [1, 0], [3, 0.0]])
    dst = np.array([[0, 0], [0, 6.0]])
    np.testing.assert_allclose(cli._chain_targets(entry, src, dst), [[0, 0], [0, 2], [0, 6]])


def test_landmark_range_check():
    with pytest.raises(cli.CliError, match="out of range"):
        cli.planar_landmarks([cli.LandmarkEntry("p", [50], uv=(0, 0))], 10)
    with pytest.raises(cli.CliError, match="destination mesh"):
        cli.planar_landmarks([cli.LandmarkEntry("s", [1], [2])], 10)


@pytest.mark.parametrize("name, code, cls", [
    ("sq.off", 0, "simply-connected open"),
    ("ann.off", 0, "multiply-connected open (2 loops)"),
    ("sph.off", 0, "closed genus-0"),
    ("two.off", 1, "unsupported"),
])
def test_check(workdir, capsys, name, code, cls):
    rc, out, _ = run(capsys, "check", workdir / name)
    assert rc == code and cls in out.splitlines()[0]


def test_missing_file_is_hard_failure(workdir, capsys):
    rc, _, err = run(capsys, "check", workdir / "nope.off")
    assert rc == 1 and "error" in err


def test_flatten_writes_uv(workdir, capsys):
    rc, out, _ = run(capsys, "flatten", workdir / "disk.off", "--domain", "rect", "--out", workdir / "f.obj")
    assert rc == 0
    m = load_mesh(workdir / "f.obj")
    assert m.uv.min() > -1e-9 and m.uv.max() < 1 + 1e-9


def test_solve_constant_mu(workdir, capsys):
    rc, out, _ = run(capsys, "solve", workdir / "sq.off", "--mu", "0.2+0.1j", "--boundary", "free",
                     "--landmarks", _write(workdir, "two.txt", "p 0 0 0\np 120 1 1\n"), "--out", workdir / "s.obj")
    assert rc == 0 and "max |mu(f) - mu| " in out
    err = float(re.search(r"max \|mu\(f\) - mu\| (\S+),", out).group(1))
    assert err < 1e-8


def test_solve_rejects_large_mu(workdir, capsys):
    rc, _, err = run(capsys, "solve", workdir / "sq.off", "--mu", "1.2", "--out", workdir / "s.obj")
    assert rc == 1 and "below 1" in err


def _write(d, name, text):
    (d / name).write_text(text)
    return d / name


def test_teich_rect_report_round_trip(workdir, capsys):
    rc, out, _ = run(capsys, "teich", workdir / "sq.off", "rect 2 1", "--boundary", "rect",
                     "--out-prefix", workdir / "o" / "r")
    assert rc == 0
    paths = written_paths(out)
    assert len(paths) == 4 and all(p.exists() for p in paths)
    report = json.loads((workdir / "o" / "r_report.json").read_text())
    cli.validate_report(report)
    assert report["final"]["mean"] == pytest.approx(1 / 3, abs=1e-9)
    assert report["content_hash"] == cli.content_hash(report)
    rc, out, _ = run(capsys, "report", workdir / "o" / "r_report.json")
    assert rc == 0 and out.strip().endswith("Teichmüller criterion: PASS")


def test_content_hash_ignores_timings(workdir, capsys):
    hashes = []
    for k in range(2):
        run(capsys, "teich", workdir / "sq.off", workdir / "rect.off", "--out-prefix", workdir / f"h{k}")
        report = json.loads((workdir / f"h{k}_report.json").read_text())
        report["histogram"] = report["trace"] = ""
        report.pop("content_hash")
        hashes.append(cli.content_hash(report))
    assert hashes[0] == hashes[1]


def test_teich_not_converged_exit_code(workdir, capsys):
    rc, out, _ = run(capsys, "teich", workdir / "disk.off", "--boundary", "disk", "--landmarks",
                     workdir / "disk_lm.txt", "--max-iter", "3", "--max-outer", "1",
                     "--out-prefix", workdir / "nc")
    assert rc == 2 and "NOT converged" in out
    assert all(p.exists() for p in written_paths(out))
    report = cli.load_report(workdir / "nc_report.json")
    assert report["converged"] is False and report["flip_count"] == 0


@pytest.mark.parametrize("method", ["circle", "pinned"])
def test_teich_disk_methods(workdir, capsys, method):
    rc, out, _ = run(capsys, "teich", workdir / "disk.off", "--boundary", "disk", "--disk-method", method,
                     "--landmarks", workdir / "disk_lm.txt", "--max-iter", "20", "--out-prefix", workdir / method)
    assert rc in (0, 2)
    report = cli.load_report(workdir / f"{method}_report.json")
    assert report["landmarks"]["max_hard"] < 1e-9


def test_free_boundary_needs_landmarks(workdir, capsys):
    rc, _, err = run(capsys, "teich", workdir / "sq.off", "--boundary", "free")
    assert rc == 1 and "insufficient" in err


def test_one_landmark_is_insufficient_for_free(workdir, capsys):
    lm = _write(workdir, "one.txt", "p 0 0 0\n")
    rc, _, err = run(capsys, "teich", workdir / "sq.off", "--boundary", "free", "--landmarks", lm)
    assert rc == 1 and "insufficient" in err


def test_sphere_boundary_on_open_mesh_fails(workdir, capsys):
    rc, _, err = run(capsys, "teich", workdir / "sq.off", workdir / "sph.off", "--boundary", "sphere")
    assert rc == 1 and "closed genus-0" in err


def test_teich_sphere(workdir, capsys):
    lm = _write(workdir, "sl.txt", "s 10 10\ns 20 20\ns 30 30\n")
    rc, out, _ = run(capsys, "teich", workdir / "sph.off", workdir / "sph.off", "--boundary", "sphere",
                     "--landmarks", lm, "--max-iter", "5", "--max-outer", "2", "--pole-band", "0.8",
                     "--out-prefix", workdir / "sp")
    assert rc in (0, 2)
    report = cli.load_report(workdir / "sp_report.json")
    assert report["flip_count"] == 0 and report["final"]["sup"] < 1e-6


def test_texture_rect_domain(workdir, capsys):
    lm = _write(workdir, "t.txt", "p 60 0.6 0.45\n")
    rc, out, _ = run(capsys, "texture", workdir / "sq.off", "--domain", "rect 1 1", "--landmarks", lm,
                     "--max-iter", "50", "--out-prefix", workdir / "tx")
    assert rc in (0, 2)
    m = load_mesh(workdir / "tx.obj")
    assert m.uv[60] == pytest.approx([0.6, 0.45])


def test_texture_free_warns_outside_unit_square(workdir, capsys, caplog):
    lm = _write(workdir, "t.txt", "p 0 0 0\np 120 2 1\n")
    with caplog.at_level("WARNING"):
        rc, _, _ = run(capsys, "texture", workdir / "sq.off", "--landmarks", lm, "--out-prefix", workdir / "tf")
    assert rc == 0 and "outside" in caplog.text


def test_report_schema_errors(workdir, capsys):
    (workdir / "bad.json").write_text('{"schema": "teichmap-report/1", "inp')
    rc, _, err = run(capsys, "report", workdir / "bad.json")
    assert rc == 1 and "schema error" in err
    (workdir / "bad2.json").write_text('{"schema": "teichmap-report/1"}')
    rc, _, err = run(capsys, "report", workdir / "bad2.json")
    assert rc == 1 and "schema error" in err


def test_report_fail_verdict():
    report = {"final": {"mean": 0.2, "std": 0.05, "sup": 0.4, "K": 2.3}, "classification": "x",
              "energy": {"start": 1, "end": 0.5}, "iterations": 3, "converged": True, "flip_count": 0,
              "clamp_count": 0, "landmarks": {"max_hard": 0, "max_soft": 0}, "timings": {"total": 1.0}}
    assert cli.summary_lines(report)[-1] == "Teichmüller criterion: FAIL"
