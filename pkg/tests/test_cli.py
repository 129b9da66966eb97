from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conftest import TABLE1
from foldcrest.cli import main
from foldcrest.io import load_schema

jsonschema = pytest.importorskip("jsonschema")


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err
    return _run


def validate(name, doc):
    jsonschema.validate(doc, load_schema(name),
                        format_checker=jsonschema.Draft202012Validator.FORMAT_CHECKER)


def test_coeffs_fhn(run):
    code, out, _ = run("coeffs", "--system", "fhn")
    assert code == 0
    assert '"gamma": -0.3333333333333333' in out
    doc = json.loads(out)
    validate("coeffs", doc)
    c = doc["coefficients"]
    assert (c["alpha1"], c["alpha2"], c["beta1"], c["beta2"], c["kappa"], c["nu"]) == \
        (-0.5, -0.5, -0.5, -0.5, 2.0, 0.0)
    assert doc["conditions"]["passes"] is True


def test_coeffs_original_coordinates_agree(run):
    a = json.loads(run("coeffs", "--system", "fhn")[1])["coefficients"]
    b = json.loads(run("coeffs", "--system", "fhn-original")[1])["coefficients"]
    assert a == b


def test_coeffs_missing_jet(run, tmp_path):
    code, _, err = run("coeffs", "--jet", str(tmp_path / "missing.json"))
    assert code == 1 and "not found" in err


def test_coeffs_degenerate_jet(run, tmp_path):
    jet = json.loads(run("coeffs", "--system", "fhn")[1])["jet"]
    jet["F_xx"] = 0.0
    p = tmp_path / "degenerate.json"
    p.write_text(json.dumps(jet))
    code, out, err = run("coeffs", "--jet", str(p))
    assert code == 2
    doc = json.loads(out)
    validate("coeffs", doc)
    assert doc["conditions"]["conditions"]["fold_nondegenerate"]["passes"] is False
    assert doc["conditions"]["passes"] is False
    assert "fold_nondegenerate" in err


def test_coeffs_set_override(run):
    code, out, _ = run("coeffs", "--set", "alpha2=0.25")
    assert code == 0 and json.loads(out)["coefficients"]["alpha2"] == 0.25
    assert run("coeffs", "--set", "bogus=1")[0] == 1
    assert run("coeffs", "--set", "alpha2")[0] == 1


def test_predict(run):
    code, out, _ = run("predict", "--system", "fhn", "--eps", "1e-4")
    doc = json.loads(out)
    validate("predict", doc)
    assert code == 0
    assert abs(doc["a_star"] - 0.99986822927480) < 1e-12
    assert doc["fold_distance"] == pytest.approx(doc["delta_star"], rel=1e-15)
    doc = json.loads(run("predict", "--eps", "1e-2")[1])
    assert doc["hopf_estimate"] == 0.9975


def test_predict_range_and_degenerate(run):
    assert run("predict", "--eps", "0.5")[0] == 1
    assert run("predict", "--eps", "1e-3", "--set", "alpha2=0")[0] == 2
    assert run("predict", "--eps", "1e-3", "--set", "alpha2=0.5")[0] == 2


def test_verify_gate(run):
    code, _, err = run("verify", "--system", "fhn", "--eps", "1e-10")
    assert code == 1 and "--force" in err


def test_verify_stable_side_bracket(run):
    code, _, err = run("verify", "--eps", "1e-2", "--bracket", "0.999:0.9995")
    assert code == 3 and "BracketInvalid" in err


def test_verify_bad_bracket_text(run):
    assert run("verify", "--eps", "1e-2", "--bracket", "0.99")[0] == 1


@pytest.mark.slow
def test_verify_csv_row_with_sidecar(run, tmp_path):
    out = tmp_path / "row.csv"
    code, _, _ = run("verify", "--eps", "1e-2", "--bracket", "0.9905:0.9915",
                     "--param-tol", "1e-6", "--format", "csv", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "eps,a_num,a_asym,diff"
    eps, a_num, a_asym, diff = lines[1].split(",")
    assert abs(float(a_num) - TABLE1[1e-2][0]) < 1e-6
    manifest = json.loads((tmp_path / "row.csv.manifest.json").read_text())
    validate("manifest", manifest)
    assert manifest["command"] == "verify"


def test_table1_default(run):
    code, out, _ = run("table1")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "eps,a_num,a_asym,diff" and len(lines) == 7
    for line in lines[1:]:
        eps, a_num, a_asym, diff = line.split(",")
        assert a_num == "" and diff == ""
        assert abs(float(a_asym) - TABLE1[float(eps)][1]) < 1e-12
        assert len(a_asym.split(".")[1]) == 14


def test_table1_extra_eps(run):
    lines = run("table1", "--eps-list", "1e-3")[1].splitlines()
    assert len(lines) == 8 and lines[-1].startswith("1e-03,,0.99888616159213,")


def test_table1_json(run):
    doc = json.loads(run("table1", "--format", "json")[1])
    validate("table1", doc)
    assert len(doc["rows"]) == 6


def test_table1_byte_identical():
    cmd = [sys.executable, "-m", "foldcrest", "table1"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a.startswith(b"eps,a_num,a_asym,diff\n")


@pytest.mark.slow
def test_table1_numeric(run):
    code, out, _ = run("table1", "--numeric")
    row = out.splitlines()[1].split(",")
    assert code == 0 and row[0] == "1e-02"
    assert abs(float(row[1]) - TABLE1[1e-2][0]) < 1e-6
    assert abs(abs(float(row[3])) - 2.88e-5) < 1e-6
    assert all(line.split(",")[1] == "" for line in out.splitlines()[2:])


def test_simulate_nf_identity(run):
    code, out, _ = run("simulate-nf", "--mu", "0", "--zeta0", "0.3", "--J0", "1e-3")
    doc = json.loads(out)
    validate("simulate-nf", doc)
    assert code == 0
    for key in ("delta_zeta", "delta_J", "return_delta_zeta", "return_delta_J"):
        assert abs(doc["numeric"][key]) < 1e-8


def test_simulate_nf_linear_in_mu(run):
    dJ = [json.loads(run("simulate-nf", "--mu", str(mu), "--J0", "1e-3")[1])["numeric"]["delta_J"]
          for mu in (2e-3, 1e-3)]
    assert 0.4 <= dJ[1] / dJ[0] <= 0.6


def test_simulate_nf_trajectory_csv(run, tmp_path):
    traj = tmp_path / "loop.csv"
    code, out, _ = run("simulate-nf", "--mu", "0.01", "--J0", "0.1", "--trajectory", str(traj))
    assert code == 0 and json.loads(out)["numeric"]["minus"]["t"] > 0
    lines = traj.read_text().splitlines()
    assert lines[0] == "tau,xi,eta,zeta,J" and len(lines) > 10
    code, out, _ = run("simulate-nf", "--mu", "0.01", "--J0", "0.1", "--format", "csv")
    assert out.splitlines() == lines


def test_simulate_nf_bad_J0(run):
    assert run("simulate-nf", "--mu", "0.01", "--J0", "0.5")[0] == 1


def test_sweep_json(run):
    code, out, _ = run("sweep", "--eps", "1e-2", "--a-range", "0.9918:0.992:2")
    doc = json.loads(out)
    validate("sweep", doc)
    assert code == 0 and [r["stable"] for r in doc["rows"]] == [True, True]


def test_sweep_bad_range(run):
    assert run("sweep", "--eps", "1e-2", "--a-range", "0.99:0.992")[0] == 1


def test_usage_errors(run):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["predict"])
    assert exc.value.code == 1


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "foldcrest", "predict", "--eps", "1e-2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["hopf_estimate"] == 0.9975
