import json
import subprocess
import sys

import numpy as np
import pytest

from impgap import __version__
from impgap.cli import main
from impgap.fixtures import make_problem, reference_process
from impgap.io import validate_report
from impgap.model import integrate_strict, read_extended_csv, write_extended_csv, write_strict_csv

JUMP = {
    "name": "jump",
    "n": 1,
    "m": 1,
    "q": 0,
    "drift": [{"const": 0.0}],
    "impulse": [[{"const": 1.0}]],
    "cost": {"terms": [[1.0, [0, 0, 0, 0, 1]]]},
    "target": {"box": {"lo": [0, 0, 0, 1], "hi": [0, 0, 5, 1]}},
    "cone": {"orthant": 1},
    "controls": {"finite": [[]]},
}


def _report(out, kind):
    data = json.loads((out / f"{kind}.json").read_text())
    validate_report(data)
    assert data["kind"] == kind
    return data


def test_check_qualifications_first_example(tmp_path):
    assert main(["check-qualifications", "--problem", "example-4.1", "--out", str(tmp_path)]) == 0
    data = _report(tmp_path, "check-qualifications")
    assert data["verdict"]["verdict"] == "NO-GAP-CERTIFIED"
    assert data["qualifications"]["CQn_b"]["status"] == "holds"
    assert data["process_source"] == "reference"


def test_check_pmp_third_example(tmp_path):
    assert main(["check-pmp", "--problem", "example-4.3", "--grid", "100", "--out", str(tmp_path)]) == 0
    data = _report(tmp_path, "check-pmp")
    assert data["pmp"]["passed"] is True


def test_check_pmp_rejects_zero_multipliers(tmp_path):
    M = 50
    mult = {"p0": [0.0] * (M + 1), "p": [[0.0] * 3] * (M + 1), "pi": 0.0, "lam": 0.0, "measures": []}
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(mult))
    code = main(["check-pmp", "--problem", "example-4.2", "--grid", str(M), "--multipliers", str(path), "--out", str(tmp_path)])
    assert code == 2
    assert "nontriviality" in _report(tmp_path, "check-pmp")["pmp"]["failures"]


def test_classify_third_example(tmp_path):
    assert main(["classify", "--problem", "example-4.3", "--grid", "100", "--out", str(tmp_path)]) == 0
    data = _report(tmp_path, "classify")
    assert data["normality"]["label"] == "degenerate-abnormal"


def test_probe_gap_writes_csv_and_svg(tmp_path):
    args = ["probe-gap", "--problem", "example-4.3", "--grid", "100", "--eps-list", "1/4,1/8", "--out", str(tmp_path)]
    assert main(args) == 0
    data = _report(tmp_path, "probe-gap")
    assert [r["eps"] for r in data["gap"]["rows"]] == [0.25, 0.125]
    assert (tmp_path / "gap.csv").read_text().startswith("eps,feasible,cost")
    assert (tmp_path / "gap.svg").read_text().lstrip().startswith("<?xml")


def test_solve_is_deterministic(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["solve", "--problem", "example-4.2", "--grid", "40", "--multistart", "2", "--seed", "3", "--out", str(out)]) == 0
        outs.append(out)
    for name in ("solve.json", "solution.csv", "solution.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    _report(outs[0], "solve")


def test_solve_custom_problem_file(tmp_path):
    path = tmp_path / "jump.json"
    path.write_text(json.dumps(JUMP))
    assert main(["solve", "--problem", str(path), "--grid", "30", "--multistart", "2", "--no-plots", "--out", str(tmp_path)]) == 0
    data = _report(tmp_path, "solve")
    assert data["solve"]["objective"] == pytest.approx(1.0, abs=1e-6)
    assert not (tmp_path / "solution.svg").exists()


def test_unreachable_custom_problem_is_inconclusive(tmp_path):
    path = tmp_path / "jump.json"
    path.write_text(json.dumps({**JUMP, "target": {"box": {"lo": [0, 0, 0, -1], "hi": [0, 0, 5, -1]}}}))
    assert main(["solve", "--problem", str(path), "--grid", "30", "--multistart", "2", "--no-plots", "--out", str(tmp_path)]) == 2
    assert _report(tmp_path, "solve")["solve"]["status"] != "ok"


def test_embed_constant_control(tmp_path):
    pb = make_problem("example-4.2")
    strict = integrate_strict(pb, np.linspace(0, 1, 11), np.full((11, 2), 0.4), np.zeros((10, 1)), [0.1, 0.2, 0.3])
    src = tmp_path / "strict.csv"
    write_strict_csv(strict, src)
    assert main(["embed", str(src), "--problem", "example-4.2", "--out", str(tmp_path)]) == 0
    ext = read_extended_csv(tmp_path / "extended.csv")
    np.testing.assert_allclose(ext.omega0, 1.0)
    data = _report(tmp_path, "embed")
    assert data["roundtrip_d_infty"] < 1e-9 and data["cost_change"] == 0.0


def test_invert_refuses_fast_arc(tmp_path, capsys):
    src = tmp_path / "ref.csv"
    write_extended_csv(reference_process(make_problem("example-4.1"), 40), src)
    assert main(["invert", str(src), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("impgap: error:") and "20" in err


def test_invalid_problem_file_messages(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1,\n "m": }')
    assert main(["solve", "--problem", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({**JUMP, "n": "one"}))
    assert main(["solve", "--problem", str(wrong), "--out", str(tmp_path)]) == 1
    assert "problem.n" in capsys.readouterr().err
    assert main(["solve", "--problem", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("IMPGAP_OUT", str(tmp_path / "env"))
    # every qualification fails and no normality verdict is computed here: inconclusive
    assert main(["check-qualifications", "--problem", "example-4.3", "--grid", "50", "--no-plots"]) == 2
    assert _report(tmp_path / "env", "check-qualifications")["verdict"]["verdict"] == "INCONCLUSIVE"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "impgap", "--version"], capture_output=True, text=True, check=True)
    assert __version__ in out.stdout
