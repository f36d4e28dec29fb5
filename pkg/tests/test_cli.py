import json
import subprocess
import sys

import pytest

from machtherm.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERIC, EXIT_OK, main

SHORT = """
scenario: {initial_C: 93.0, t_end_s: 120.0, dt_s: 10.0, snapshot_every_steps: 6}
output: {directory: out}
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_dump_materials(tmp_path, capsys):
    assert main(["dump-materials", "--out", str(tmp_path)]) == EXIT_OK
    assert "stator_yoke" in capsys.readouterr().out
    assert (tmp_path / "materials.csv").exists()
    assert manifest(tmp_path)["command"] == "dump-materials"


def test_mesh_command(tmp_path, capsys):
    cfg = write(tmp_path, "geometry: {resolution_level: 1}")
    assert main(["mesh", "--config", str(cfg), "--out", str(tmp_path / "m")]) == EXIT_OK
    assert capsys.readouterr().out.startswith("nodes=")
    from machtherm.mesh import read_msh
    assert read_msh(tmp_path / "m" / "mesh.msh").n_elements == manifest(tmp_path / "m")["elements"]


def test_simulate_then_analyze(tmp_path, capsys):
    cfg = write(tmp_path, SHORT)
    assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    names = {p.name for p in out.iterdir()}
    assert {"traces.csv", "probes.csv", "energy_balance.csv", "final.vtk", "final_field.csv",
            "snapshot_0000000.vtk", "snapshot_0000012.vtk", "manifest.json"} <= names
    m = manifest(out)
    assert m["max_balance_residual"] < 1e-8
    assert set(m["outputs"]) == names - {"manifest.json"}
    # the yoke cools well past 1/e within two minutes
    assert main(["analyze", "--config", str(cfg), "--measured", str(out / "traces.csv")]) \
        == EXIT_NUMERIC
    assert "never reaches the threshold" in capsys.readouterr().err


def test_simulation_is_deterministic(tmp_path):
    cfg = write(tmp_path, SHORT)
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")])
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "traces.csv").read_bytes() == (b / "traces.csv").read_bytes()
    assert manifest(a)["config_hash"] == manifest(b)["config_hash"]


def test_analyze_with_measured_traces(tmp_path, capsys):
    cfg = write(tmp_path, """
scenario: {initial_C: 93.0, t_end_s: 3000.0, dt_s: 20.0}
probes: {use_defaults: false, points: {y: {x_m: 0.06, y_m: 0.04, group: stator_yoke}}}
""")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    assert main(["analyze", "--config", str(cfg), "--out", str(out),
                 "--measured", str(out / "traces.csv")]) == EXIT_OK
    assert "rel_error=0.000 %" in capsys.readouterr().out
    assert (out / "time_constants.csv").exists() and (out / "abs_error_traces.csv").exists()


@pytest.mark.parametrize("text,msg", [
    ("scenario: {bogus: 1}", "error [machtherm.config]"),
    ("boundaries: {jacket_tag: lid}", "not in the mesh"),
    ("probes: {use_defaults: false, points: {p: {x_m: 1.0, y_m: 1.0}}}", "outside the mesh"),
])
def test_config_errors_exit_1(tmp_path, capsys, text, msg):
    cfg = write(tmp_path, text)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert msg in capsys.readouterr().err


def test_calibrate_needs_measurements(tmp_path, capsys):
    cfg = write(tmp_path, "calibration: {parameters: [{kind: robin, target: shaft_surface}]}")
    assert main(["calibrate", "--config", str(cfg)]) == EXIT_CONFIG
    assert "needs measured traces" in capsys.readouterr().err
    cfg = write(tmp_path, "scenario: {t_end_s: 10}")
    assert main(["calibrate", "--config", str(cfg), "--measured", "x.csv"]) == EXIT_CONFIG
    assert "nothing to fit" in capsys.readouterr().err


def test_calibrate_budget_exit_3(tmp_path, capsys):
    truth = write(tmp_path, """
scenario: {initial_C: 93.0, t_end_s: 200.0, dt_s: 20.0}
boundaries: {robin: {conductance_W_Cm: 0.3}}
""", "truth.yaml")
    assert main(["simulate", "--config", str(truth), "--out", str(tmp_path / "truth")]) == EXIT_OK
    cfg = write(tmp_path, """
scenario: {initial_C: 93.0, t_end_s: 200.0, dt_s: 20.0}
calibration:
  measured_traces: truth/traces.csv
  parameters: [{kind: robin, target: shaft_surface}]
  max_evals: 4
""")
    code = main(["calibrate", "--config", str(cfg), "--out", str(tmp_path / "cal"), "--seed", "7"])
    assert code == EXIT_NOT_CONVERGED
    assert "NOT converged" in capsys.readouterr().out
    m = manifest(tmp_path / "cal")
    assert m["seed"] == 7 and m["evaluations"] == 4 and not m["converged"]
    assert {"calibration.csv", "convergence_log.csv", "fitted_materials.csv"} <= set(m["outputs"])


def test_entry_point_runs_as_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "machtherm", "dump-materials", "--out", str(tmp_path),
                           "--threads", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert manifest(tmp_path)["threads"] == 1


def test_bad_thread_count():
    with pytest.raises(SystemExit):
        main(["dump-materials", "--threads", "0"])
