import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from mortal_fpt import cli
from mortal_fpt.experiments import read_results

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
HEADER = "experiment_id,method,lambda,beta,kappa,m,estimate,std_err,n_eff,L,D,prediction,ratio"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


ONEDIM = """\
experiment_id: t
problem: {preset: half-line, L: 1.0}
lambda_bar: [25]
m: [1]
n: 20000
seed: 7
"""


def test_analytic_examples(capsys):
    code, out, _ = run(capsys, "analytic", "--lambda-bar", 1, "--kappa-bar", 1, "--m", 1)
    assert code == 0 and float(out) == pytest.approx(0.75, rel=1e-12)
    code, out, _ = run(capsys, "analytic", "--predict", "--L", 1, "--D", 1, "--lambda", 100, "--m", 1)
    assert code == 0 and float(out) == pytest.approx(0.05, rel=1e-14)
    code, _, err = run(capsys, "analytic", "--m", 3, "--lambda-bar", 1, "--kappa-bar", 1)
    assert code == 2 and "UnsupportedOrder" in err


def test_analytic_cv_and_bad_flags(capsys):
    # perfect target: the conditional law is inverse Gaussian with CV^2 = lambda_bar^(-1/2)
    code, out, _ = run(capsys, "analytic", "--lambda-bar", 16, "--kappa-bar", "inf", "--cv")
    assert code == 0 and float(out) == pytest.approx(0.5, rel=1e-10)
    code, _, err = run(capsys, "analytic", "--lambda-bar", -1)
    assert code == 2 and "--lambda-bar" in err
    code, _, err = run(capsys, "analytic", "--predict", "--L", 1, "--D", 1)
    assert code == 2 and "--lambda" in err
    code, _, err = run(capsys, "analytic", "--lambda-bar", "x")
    assert code == 2


def test_simulate_writes_header_and_manifest(capsys, tmp_path):
    cfg = write_cfg(tmp_path, ONEDIM)
    out = tmp_path / "r"
    code, _, _ = run(capsys, "simulate", "--config", cfg, "--lambda-bar", 25, "--n", 20000, "--seed", 7, "--out", out)
    assert code == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == HEADER and len(lines) == 2
    row = read_results(out / "results.csv")[0]
    assert row["method"] == "monte-carlo" and row["lambda"] == 25.0
    assert abs(row["ratio"] - 1) < 0.1
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 7 and man["command"] == "simulate"
    assert man["resolved"]["n_trajectories"] == 20000
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "results.csv"]


def test_simulate_is_byte_identical(capsys, tmp_path):
    cfg = write_cfg(tmp_path, ONEDIM)
    texts = []
    for i, workers in enumerate((1, 1, 2)):
        out = tmp_path / f"r{i}"
        code, _, _ = run(capsys, "simulate", "--config", cfg, "--lambda-bar", 25, 50, "--seed", 3,
                         "--workers", workers, "--out", out)
        assert code == 0
        texts.append((out / "results.csv").read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_refuses_overwrite_without_force(capsys, tmp_path):
    cfg = write_cfg(tmp_path, ONEDIM)
    args = ["quadrature", "--config", cfg, "--out", tmp_path / "q"]
    assert run(capsys, *args)[0] == 0
    code, _, err = run(capsys, *args)
    assert code == 2 and "--force" in err
    assert run(capsys, *args, "--force")[0] == 0


def test_quadrature_rows_match(capsys, tmp_path):
    cfg = write_cfg(tmp_path, ONEDIM)
    code, _, _ = run(capsys, "quadrature", "--config", cfg, "--lambda-bar", 0.1, 100, "--kappa-bar", 1, "inf",
                     "--m", 1, 2, "--out", tmp_path / "q")
    assert code == 0
    rows = read_results(tmp_path / "q" / "results.csv")
    assert len(rows) == 16
    a = [r["estimate"] for r in rows if r["method"] == "analytic"]
    q = [r["estimate"] for r in rows if r["method"] == "quadrature"]
    assert q == pytest.approx(a, rel=1e-6)


def test_exit_codes(capsys, tmp_path, monkeypatch):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)
    cfg = write_cfg(tmp_path, ONEDIM)
    # usage: missing output directory, bad count, unknown subcommand
    assert run(capsys, "simulate", "--config", cfg)[0] == 2
    assert run(capsys, "simulate", "--config", cfg, "--n", 0, "--out", tmp_path / "a")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    # validation: unknown key, unparsable file, bad preset
    assert run(capsys, "simulate", "--config", write_cfg(tmp_path, ONEDIM + "colour: red\n", "b.cfg"),
               "--out", tmp_path / "b")[0] == 3
    assert run(capsys, "simulate", "--config", write_cfg(tmp_path, "problem: [unclosed\n", "c2.cfg"),
               "--out", tmp_path / "c")[0] == 3
    assert run(capsys, "simulate", "--config", write_cfg(tmp_path, "problem: {preset: torus}\n", "d.cfg"),
               "--out", tmp_path / "d")[0] == 3


def test_engine_failure_exit_code(capsys, tmp_path):
    # too few trajectories to reach the effective-sample floor at a large rate, even after a retry
    cfg = write_cfg(tmp_path, ONEDIM.replace("n: 20000", "n: 200").replace("[25]", "[400]"))
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "e")
    assert code == 4 and "failed" in err
    rows = read_results(tmp_path / "e" / "results.csv")
    assert math.isnan(rows[0]["estimate"])
    man = json.loads((tmp_path / "e" / "manifest.json").read_text())
    assert man["failures"] and man["final_n"] == 400


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
    cfg = write_cfg(tmp_path, ONEDIM)
    assert run(capsys, "quadrature", "--config", cfg)[0] == 0
    assert (tmp_path / "env" / "results.csv").read_text().startswith(HEADER)


def test_geodesic_slab(capsys, tmp_path):
    code, out, _ = run(capsys, "geodesic", "--config", CONFIGS / "slab2d.cfg", "--grid", 256, "--out", tmp_path / "g")
    assert code == 0
    vals = dict((ln.split()[0], float(ln.split()[1])) for ln in out.splitlines())
    assert vals["L_phys"] == pytest.approx(2 * math.sqrt(2), rel=0.02)
    assert vals["L_empty"] == pytest.approx(2.0, rel=0.02)
    assert (tmp_path / "g" / "results.csv").read_text().startswith("set,L,method,h")


def test_report_emits_plot_script(capsys, tmp_path):
    cfg = write_cfg(tmp_path, ONEDIM)
    run(capsys, "quadrature", "--config", cfg, "--out", tmp_path / "q")
    code, _, _ = run(capsys, "report", "--results", tmp_path / "q" / "results.csv", "--out", tmp_path / "rep")
    assert code == 0
    script = (tmp_path / "rep" / "plot.gp").read_text()
    assert 'set datafile separator ","' in script and "results.csv" in script
    assert "analytic quadrature" in script
    assert run(capsys, "report", "--results", tmp_path / "nope.csv", "--out", tmp_path / "rep2")[0] == 2
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    assert run(capsys, "report", "--results", tmp_path / "bad.csv", "--out", tmp_path / "rep3")[0] == 3


def test_sweep_initial_study_records_failures(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "--config", CONFIGS / "qsd.cfg", "--n", 20000, "--out", tmp_path / "s")
    assert code == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["study"] == "initial"
    assert all(f["method"] == "analytic" for f in man["failures"])


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.cfg")):
        cfg = cli.load_config(p)
        cli.plan_from_config(cfg, {})


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "mortal_fpt.cli", "analytic", "--lambda-bar", "1", "--kappa-bar", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and float(r.stdout) == pytest.approx(0.75)
