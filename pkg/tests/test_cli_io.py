import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from erheo import cli
from erheo.config import SCHEMA, load_config, parse_text
from erheo.errors import ConfigError, InternalError
from erheo.io import check_vtk_header, dumps, to_jsonable, write_csv, write_vtk
from erheo.mesh import generate_rectangle, write_mesh

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """\
mesh.nx = 8
mesh.ny = 4
mesh.tags = left:S1,right:S1,top:S1,bottom:S1
data.E = uniform:0,1
data.u_hat = poiseuille:1
data.tau_hat = linear:0,0.5,0
mollifier.radius = 0.3
"""


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def read_vtk_scalars(path, name):
    lines = Path(path).read_text().splitlines()
    k = lines.index(next(ln for ln in lines if ln.startswith(f"SCALARS {name} ")))
    n = int(next(ln for ln in lines if ln.startswith("POINT_DATA")).split()[1])
    return np.array([float(v) for v in lines[k + 2:k + 2 + n]])


# -- solve -----------------------------------------------------------------


def test_zero_data_config(tmp_path, capsys):
    code, out, _ = run(["solve", "--config", str(CONFIGS / "zero_data.conf"), "--out", str(tmp_path)], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["converged"] and summary["iterations"] <= 2
    assert summary["norm_X_v"] == 0.0 and summary["norm_1_zeta"] == 0.0
    check_vtk_header(tmp_path / "fields.vtk", summary["mesh"]["nodes"])
    for name in ("pressure", "temperature", "zeta"):
        assert np.all(read_vtk_scalars(tmp_path / "fields.vtk", name) == 0.0)
    assert json.loads(out) == {"command": "solve", "converged": True, "iterations": summary["iterations"]}


def test_solve_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL + f"output.dir = {tmp_path / 'o'}\n")
    code, _, _ = run(["solve", "--config", str(cfg)], capsys)
    assert code == 0
    out = tmp_path / "o"
    with open(out / "history.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "flow_residual", "temp_residual", "coupled_residual",
                       "norm_X_v", "norm_1_zeta", "norm_2_zeta"]
    summary = json.loads((out / "summary.json").read_text())
    assert len(rows) - 1 == summary["iterations"]
    assert summary["converged"] and summary["ball_check"] and summary["apriori_bound"]["holds"]
    assert summary["coupled_residual"] < 1e-8
    # crossed pattern: 9 x 5 corners plus one centre per cell
    assert summary["mesh"]["nodes"] == 45 + 32
    assert check_vtk_header(out / "fields.vtk", 77) == 77


def test_solve_reports_beta(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL + "infsup.report = true\noutput.vtk = false\noutput.csv = false\n")
    code, _, _ = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["beta1"] > 0.1
    assert not (tmp_path / "o" / "fields.vtk").exists()


def test_determinism(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    for d in ("a", "b"):
        assert run(["solve", "--config", str(cfg), "--out", str(tmp_path / d)], capsys)[0] == 0
    for name in ("summary.json", "history.csv", "fields.vtk"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_nonpositive_a1_rejected_before_solve(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("solve must not start")

    monkeypatch.setattr(cli, "solve_coupled", boom)
    cfg = write_config(tmp_path, SMALL + "model.a1 = 0.0\n")
    code, _, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    payload = json.loads(err)
    assert payload["error"] == "ConfigError" and "a1" in payload["message"]
    assert not (tmp_path / "o").exists()


def test_inadmissible_closures_rejected(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "solve_coupled", lambda *a, **k: pytest.fail("solve must not start"))
    cfg = write_config(tmp_path, SMALL + "model.a3 = 0.9\n")
    code, _, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    assert "psi1 + 2 I dpsi1/dI >= a3" in json.loads(err)["message"]


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL + "solver.max_outer = 1\n")
    code, _, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    payload = json.loads(err)
    assert payload["error"] == "NonConvergenceError" and payload["exit_code"] == 3
    assert payload["hint"] == {"relax": 0.35}
    assert [h["iter"] for h in payload["history"]] == [0, 1]


def test_mesh_from_file(tmp_path, capsys):
    mesh = generate_rectangle(4, 4, tag_rule="left:S1,right:S1,top:S1,bottom:S1")
    write_mesh(mesh, tmp_path / "square.mesh")
    cfg = write_config(tmp_path, "mesh.source = square.mesh\nmesh.lx = 1.0\ndata.E = zero\n"
                                 "data.u_hat = zero\noutput.vtk = false\n")
    code, _, _ = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["mesh"]["nodes"] == mesh.n_nodes


def test_missing_mesh_file(tmp_path, capsys):
    cfg = write_config(tmp_path, "mesh.source = nowhere.mesh\n")
    code, _, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and json.loads(err)["error"] == "MeshError"


# -- check / infsup / sweep -------------------------------------------------


def test_check_default_model(tmp_path, capsys):
    cfg = write_config(tmp_path, "check.samples = 2000\n")
    code, out, _ = run(["check", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and json.loads(out)["passed"] is True
    report = json.loads((tmp_path / "o" / "check.json").read_text())
    assert report["sample_count"] >= 2000
    assert len(report["rows"]) == 10 and all(r["passed"] for r in report["rows"])


def test_check_violation_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, "model.a4 = 0.01\n")
    code, _, err = run(["check", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "ClosureError"
    assert (tmp_path / "o" / "check.json").exists()


def test_infsup_three_levels(tmp_path, capsys):
    cfg = write_config(tmp_path, "mesh.lx = 1.0\nmesh.ly = 1.0\nmesh.tags = left:S1,right:S1,top:S1,bottom:S1\n"
                                 "infsup.levels = 4,8,16\n")
    code, _, _ = run(["infsup", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    with open(tmp_path / "o" / "infsup.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["n"]) for r in rows] == [4, 8, 16]
    assert all(float(r["beta1"]) > 0.1 for r in rows)
    assert float(rows[0]["beta1"]) == pytest.approx(0.609660, abs=5e-6)


def test_sweep_single_kernel(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL + "mollifier.sweep_count = 1\n")
    code, out, _ = run(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and json.loads(out)["all_converged"]
    with open(tmp_path / "o" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and float(rows[0]["dv_X"]) == 0.0
    assert (tmp_path / "o" / "fields_k0.vtk").exists()


def test_sweep_without_kernel(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL.replace("mollifier.radius = 0.3", "mollifier.radius = none"))
    code, _, err = run(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and "radius" in json.loads(err)["message"]


# -- config parsing --------------------------------------------------------


def test_defaults_cover_schema():
    values = parse_text("")
    assert set(values) == set(SCHEMA)
    assert values["solver.relax"] == 0.7 and values["quadrature.degree"] == 8


@pytest.mark.parametrize("text,needle", [
    ("mesh.nx = 4\nmesh.nz = 3\n", "run.conf:2: unknown key 'mesh.nz'"),
    ("mesh.nx = 4\n\nmesh.nx = 5\n", "run.conf:3: duplicate key 'mesh.nx'"),
    ("mesh.nx = four\n", "run.conf:1: bad value for mesh.nx"),
    ("# comment\nmesh.nx 4\n", "run.conf:2: expected 'key = value'"),
    ("output.vtk = maybe\n", "run.conf:1: bad value for output.vtk"),
])
def test_config_errors_name_the_line(tmp_path, capsys, text, needle):
    cfg = write_config(tmp_path, text)
    code, _, err = run(["check", "--config", str(cfg)], capsys)
    assert code == 2
    assert needle in json.loads(err)["message"]


def test_comments_and_spacing(tmp_path):
    cfg = load_config(write_config(tmp_path, "  mesh.nx=12   # trailing\n#mesh.ny = 3\nsolver.b1 = 5\nsolver.b2 = 9\n"))
    assert cfg.get("mesh.nx") == 12 and cfg.get("mesh.ny") == 16
    assert cfg.build_solver_config().caps == (5.0, 9.0)


@pytest.mark.parametrize("text", [
    "solver.b1 = 5\n", "quadrature.degree = 1\n", "mollifier.radius = -0.1\n", "model.psi1 = unknown\n",
    "data.E = swirl:1\n", "solver.pressure_gauge = fixed\n",
])
def test_invalid_values_are_config_errors(tmp_path, text):
    cfg = load_config(write_config(tmp_path, text))
    with pytest.raises(ConfigError):
        cfg.build_solver_config()
        cfg.build_spaces(cfg.build_mesh(2, 2))
        cfg.build_kernel()
        cfg.build_model()
        cfg.build_data(cfg.build_mesh(2, 2))


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["solve", "--config", str(tmp_path / "absent.conf")], capsys)
    assert code == 2 and json.loads(err)["error"] == "ConfigError"


def test_bad_command_line(capsys):
    assert cli.main(["explode", "--config", "x"]) == 2
    assert cli.main(["solve"]) == 2


# -- environment -----------------------------------------------------------


def test_threads_variable():
    env = {"ERHEO_THREADS": "3"}
    assert cli._apply_threads(env) == 3
    assert env["OMP_NUM_THREADS"] == "3" and env["OPENBLAS_NUM_THREADS"] == "3"
    env = {"ERHEO_THREADS": "0"}
    assert cli._apply_threads(env) == 0 and "OMP_NUM_THREADS" not in env
    assert cli._apply_threads({}) is None
    env = {"ERHEO_THREADS": "2", "OMP_NUM_THREADS": "1"}
    cli._apply_threads(env)
    assert env["OMP_NUM_THREADS"] == "1"
    for bad in ("-1", "many"):
        with pytest.raises(ValueError):
            cli._apply_threads({"ERHEO_THREADS": bad})


def test_subprocess_entry_point(tmp_path):
    cfg = write_config(tmp_path, "model.a1 = -1\n")
    env = {"ERHEO_THREADS": "1", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "erheo.cli", "check", "--config", str(cfg)],
                          capture_output=True, text=True, env=env, cwd=tmp_path)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["exit_code"] == 2
    proc = subprocess.run([sys.executable, "-m", "erheo.cli", "check", "--config", str(cfg)],
                          capture_output=True, text=True, env={"ERHEO_THREADS": "-4"}, cwd=tmp_path)
    assert proc.returncode == 2 and "ERHEO_THREADS" in json.loads(proc.stderr)["message"]


# -- writers ---------------------------------------------------------------


def test_vtk_round_trip(tmp_path):
    mesh = generate_rectangle(3, 2)
    n = mesh.n_nodes
    path = write_vtk(tmp_path / "f.vtk", mesh, {"s": np.arange(n, dtype=float), "v": np.ones((n, 2))})
    assert check_vtk_header(path, n) == n
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 2.0\n")
    assert f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}" in text
    np.testing.assert_array_equal(read_vtk_scalars(path, "s"), np.arange(n))
    with pytest.raises(InternalError):
        check_vtk_header(path, n + 1)
    with pytest.raises(InternalError):
        write_vtk(tmp_path / "g.vtk", mesh, {"bad": np.zeros(n + 1)})


def test_json_and_csv_values(tmp_path):
    obj = {"b": np.float64(0.1), "a": [np.int64(3), np.bool_(True), float("nan"), math.inf], "c": np.eye(2)}
    assert to_jsonable(obj) == {"b": 0.1, "a": [3, True, "nan", "inf"], "c": [[1.0, 0.0], [0.0, 1.0]]}
    text = dumps(obj)
    assert text.index('"a"') < text.index('"b"')
    write_csv(tmp_path / "t.csv", [{"x": 0.1, "y": None, "z": True, "w": np.int32(2)}], ["x", "y", "z", "w"])
    assert (tmp_path / "t.csv").read_text() == "x,y,z,w\n0.1,,True,2\n"
