import json
import subprocess
import sys

import pytest

from cartan.cli import EXIT_CODES, emit_report, main, run_job
from cartan.config import ConfigError, load_config, resolve_config_path


def run(argv, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(list(argv) + ["--json", str(out)])
    capsys.readouterr()
    return code, json.loads(out.read_text()) if out.exists() else None


def write(tmp_path, text, name="job.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_exit_code_table():
    assert EXIT_CODES == {"pass": 0, "fail": 1, "unknown": 2, "config-error": 3}


def test_check_algebroid_geometry_table(tmp_path, capsys):
    code, rep = run(["check-algebroid", "--config", "constant_curvature"], tmp_path, capsys)
    assert code == 0 and rep["status"] == "pass"
    names = {row["point"]["k"]: row["geometry"] for row in rep["isotropy"]}
    assert names == {-1.0: "Hyperbolic Geometry", 0.0: "Euclidean Geometry", 1.0: "Spherical Geometry"}


def test_mutated_algebroid_fails_with_witness(tmp_path, capsys):
    code, rep = run(["check-algebroid", "--config", "rank2_mutated"], tmp_path, capsys)
    assert code == 1
    assert rep["certificate"]["status"] == "pass"
    assert rep["realization"]["anchor"]["witness"] is not None


def test_unknown_exit_code_for_infinite_type(tmp_path, capsys):
    cfg = write(tmp_path, '[prolong]\nalgebra = "gl(2)"\nmax_k = 2\n')
    code, rep = run(["prolong", "--config", cfg], tmp_path, capsys)
    assert code == 2 and rep["status"] == "unknown"


def test_prolong_finite_type(tmp_path, capsys):
    code, rep = run(["prolong", "--config", "prolong_co3"], tmp_path, capsys)
    assert code == 0
    assert rep["tower"] == [3, 0] and rep["verdict"] == "FiniteType(2)"


@pytest.mark.parametrize("text, fragment", [
    ("", "empty"),
    ("[algebroid\n", ""),
    ('job = "check-algebroid"\n[algebroid]\ncoords = ["x"]\nfiber_rank = 1\nbogus = 1\n', "unknown keys"),
    ('[coframe]\ncoords = ["x"]\ntheta."1.1" = "1"\n', "needs blocks"),
    ('[algebroid]\ncoords = ["x"]\nfiber_rank = 2\nC."1.1.2" = "x +* 2"\n', "C."),
    ('[algebroid]\ncoords = ["x"]\nfiber_rank = 2\nC."3.1.2" = "x"\n', "out of range"),
    ("[nonsense]\n", "unknown top-level"),
])
def test_config_errors(tmp_path, capsys, text, fragment):
    cfg = write(tmp_path, text)
    assert main(["check-algebroid", "--config", cfg]) == 3
    err = capsys.readouterr().err
    assert "config error" in err and fragment in err


def test_missing_config_file(capsys):
    assert main(["check-algebroid", "--config", "/nonexistent/file.toml"]) == 3
    with pytest.raises(ConfigError):
        resolve_config_path("no_such_bundled_config")


def test_json_report_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["check-algebroid", "--config", "constant_curvature", "--json", str(out)]) == 0
    capsys.readouterr()
    assert a.read_text() == b.read_text()
    assert json.loads(a.read_text())["seed"] == 42


def test_seed_is_recorded(tmp_path, capsys):
    code, rep = run(["mc-check", "--config", "mc_rank2", "--seed", "7"], tmp_path, capsys)
    assert code == 0 and rep["seed"] == 7


def test_guards_added_for_denominators(tmp_path, capsys):
    cfg = write(tmp_path, '[algebroid]\ncoords = ["x"]\nbox = [[0.5, 2.0]]\nfiber_rank = 2\n'
                          'C."2.1.2" = "1/x"\nF."1.1" = "-1/x^2"\n')
    with pytest.warns(UserWarning, match="guards"):
        loaded = load_config(cfg, "check-algebroid")
    assert loaded.warnings
    code, rep = run(["check-algebroid", "--config", cfg], tmp_path, capsys)
    assert any("guards" in w for w in rep["warnings"])


def test_tolerance_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CARTAN_TOL", "1e-7")
    code, rep = run(["check-algebroid", "--config", "constant_curvature"], tmp_path, capsys)
    assert rep["tol"] == 1e-7
    monkeypatch.setenv("CARTAN_TOL", "abc")
    assert main(["check-algebroid", "--config", "constant_curvature"]) == 3


@pytest.mark.parametrize("job, config", [
    ("coframe", "rank2_coframe"),
    ("verify-realization", "rank2_coframe"),
    ("orbit", "orbit_rank2"),
    ("isotropy", "constant_curvature"),
])
def test_jobs_pass(tmp_path, capsys, job, config):
    code, rep = run([job, "--config", config], tmp_path, capsys)
    assert code == 0, rep
    assert rep["job"] == job


def test_gstructure_reports_convention(tmp_path, capsys):
    code, rep = run(["gstructure", "--config", "bochner_kahler"], tmp_path, capsys)
    assert code == 0
    assert rep["convention"]["bracket_sign"] == 1
    assert any(t["status"] == "fail" for t in rep["conventions_tried"])


def test_realize_without_config(tmp_path, capsys):
    code, rep = run(["realize", "--fiber", "k=-1"], tmp_path, capsys)
    assert code == 0
    assert rep["verification"]["status"] == "pass"
    assert rep["verification"]["structure_max"] < 1e-6


def test_markdown_output(capsys):
    cfg = load_config("constant_curvature", "check-algebroid")
    text = emit_report(run_job(cfg), "markdown")
    assert text.startswith("# cartan check-algebroid: PASS")
    assert "| point |" in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cartan.cli", "prolong", "--config", "prolong_co3",
                           "--format", "json"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "pass"
