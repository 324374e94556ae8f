import json
import subprocess
import sys
from pathlib import Path

import pytest

from fincell.cli import main
from fincell.config import BENCHMARKS

ROOT = Path(__file__).parents[1]
CONFIGS = ROOT / "configs"
DATA = Path(__file__).parent / "data"

QUICK_LINEAR = "[run]\nbenchmark = rod-linear\noutput = lin\n[discretization]\nfamilies = p_version\np = 1-4\ndepth = 8\n"
QUICK_QUAD = "[run]\nbenchmark = quadrature-study\noutput = quad\n[discretization]\ndepth = 4\n"


@pytest.fixture
def cfg_file(tmp_path):
    def make(text, name="run.ini"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return make


def test_list_benchmarks(capsys):
    assert main(["list-benchmarks"]) == 0
    out = capsys.readouterr().out
    for name in BENCHMARKS:
        assert name in out


def test_run_writes_artifacts(tmp_path, cfg_file, capsys):
    assert main(["run", cfg_file(QUICK_LINEAR), "--output-root", str(tmp_path / "out")]) == 0
    out = tmp_path / "out" / "lin"
    assert (out / "convergence_p_version.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "ok" and report["wall_time"] > 0
    header = (out / "convergence_p_version.csv").read_text().splitlines()[0]
    assert header == "family,p,dofs,energy,rel_error"


def test_output_root_env(tmp_path, cfg_file, monkeypatch):
    monkeypatch.setenv("FINCELL_OUTPUT_ROOT", str(tmp_path / "env"))
    assert main(["run", cfg_file(QUICK_QUAD)]) == 0
    assert (tmp_path / "env" / "quad" / "quadrature.csv").exists()


def test_overrides_with_dashes(tmp_path, cfg_file):
    text = "[run]\nbenchmark = rod-nonlinear\noutput = nl\n[discretization]\nfamilies = p_version\np = 3\ndepth = 8\n[penalty]\nq = 6\n"
    assert main(["run", cfg_file(text), "--output-root", str(tmp_path), "--delta-u", "0.5", "--increments", "2"]) == 0
    report = json.loads((tmp_path / "nl" / "report.json").read_text())
    assert report["config"]["delta_u"] == 0.5 and report["config"]["increments"] == 2


@pytest.mark.parametrize(
    "text,extra",
    [
        ("[run]\nbenchmark = nope\n", []),
        ("[run]\nbenchmark = rod-linear\n[penalty]\nwhat = 1\n", []),
        (QUICK_LINEAR, ["--q", "99"]),
    ],
)
def test_config_errors_exit_2(tmp_path, cfg_file, text, extra, capsys):
    assert main(["run", cfg_file(text), "--output-root", str(tmp_path), *extra]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_unexpected_solver_failure_exit_3(tmp_path, cfg_file):
    # one increment of 9 length units drives the stretch negative near the right end
    text = (
        "[run]\nbenchmark = rod-nonlinear\noutput = nl\n[discretization]\nfamilies = p_version\np = 2\ndepth = 4\n"
        "[penalty]\nq = 4\n[nonlinear]\nmode = standard\nincrements = 1\ndelta_u = 9.0\nexpect = success\n"
    )
    code = main(["run", cfg_file(text), "--output-root", str(tmp_path)])
    report = json.loads((tmp_path / "nl" / "report.json").read_text())
    assert code == 3 and report["status"] == "solver-failure"
    assert "invalid deformation" in report["failures"][0]["message"]
    assert report["failures"][0]["location"] > 7 / 3


def test_compare_identical_and_golden(tmp_path, cfg_file, capsys):
    text = "[run]\nbenchmark = rod-linear\noutput = lin\n"
    assert main(["run", cfg_file(text), "--output-root", str(tmp_path), "--families", "bspline"]) == 0
    produced = tmp_path / "lin" / "convergence_bspline.csv"
    golden = DATA / "rod_linear_convergence_bspline.csv"
    assert main(["compare", str(produced), str(produced)]) == 0
    assert main(["compare", str(produced), str(golden), "--tol", "rel_error=1e-4,1e-14", "--rtol", "1e-8"]) == 0
    verdict = json.loads(capsys.readouterr().out.split("\n}\n")[-2] + "\n}")
    assert verdict["verdict"] == "pass"


def test_compare_perturbed_names_row_and_column(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("x,c\n0.0,1.0\n0.5,2.0\n")
    b.write_text("x,c\n0.0,1.0\n0.5,2.001\n")
    assert main(["compare", str(a), str(b)]) == 4
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["verdict"] == "fail"
    assert verdict["failures"][0] == {"row": 2, "column": "c", "value": "2.0", "reference": "2.001"}
    assert main(["compare", str(a), str(b), "--tol", "c=1e-3"]) == 0


def test_compare_schema_mismatch(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("x,c\n0.0,1.0\n")
    b.write_text("x,conc\n0.0,1.0\n")
    assert main(["compare", str(a), str(b)]) == 4
    assert "schema mismatch" in json.loads(capsys.readouterr().out)["message"]


def test_compare_missing_file(tmp_path):
    assert main(["compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 4


def test_nan_equals_nan(tmp_path):
    a = tmp_path / "a.csv"
    a.write_text("x\nnan\n")
    assert main(["compare", str(a), str(a)]) == 0


def test_deterministic_csv(tmp_path, cfg_file):
    path = cfg_file(QUICK_LINEAR)
    main(["run", path, "--output-root", str(tmp_path / "a")])
    main(["run", path, "--output-root", str(tmp_path / "b")])
    for name in ("convergence_p_version.csv", "strain_p_version.csv"):
        assert (tmp_path / "a" / "lin" / name).read_bytes() == (tmp_path / "b" / "lin" / name).read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fincell.cli", "list-benchmarks"], capture_output=True, text=True)
    assert proc.returncode == 0 and "transport" in proc.stdout
