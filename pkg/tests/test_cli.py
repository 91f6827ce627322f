import json
import subprocess
import sys

import pytest

from geoentangle import cli, geoent, harness, imps
from geoentangle.errors import InvariantViolation, NumericalBreakdown


@pytest.fixture(scope="module")
def state_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("state") / "gs.json"
    assert cli.main(["gs", "--model", "tfim", "--h", "2", "--chi", "8", "--seed", "1", "--out", str(path)]) == 0
    return path


def test_gs_writes_loadable_state(state_file):
    mps = imps.load_imps(state_file)
    assert mps.chi <= 8
    assert max(imps.canonical_residuals(mps)) <= 1e-8


def test_analyze(state_file, capsys):
    assert cli.main(["analyze", "--state", str(state_file), "--L", "1,4"]) == 0
    out = capsys.readouterr().out
    assert "xi" in out and "E_asym" in out and "E1(L=4)" in out


def test_geoent(state_file, capsys):
    assert cli.main(["geoent", "--state", str(state_file), "--L", "3", "--starts", "2"]) == 0
    value = float(capsys.readouterr().out.split()[1])
    expect = geoent.geoent_finite(imps.load_imps(state_file), 3, starts=2).E
    assert value == pytest.approx(expect, abs=1e-11)


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["gs", "--h", "1.0"],
        ["gs", "--h", "abc", "--out", "x.json"],
        ["critical", "--L-list", "4,x", "--out-dir", "d"],
        ["geoent", "--state", "s.json", "--L", "0"],
    ],
)
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(argv)
    assert err.value.code == 1


def test_missing_state_is_io_error(tmp_path):
    assert cli.main(["analyze", "--state", str(tmp_path / "missing.json")]) == 1


def test_invalid_points(tmp_path):
    args = ["sweep", "--h-min", "2", "--h-max", "3", "--points", "1", "--out-dir", str(tmp_path)]
    assert cli.main(args) == 1


def test_numerical_failure_exit_code(monkeypatch, state_file):
    def boom(*a, **k):
        raise NumericalBreakdown("synthetic")

    monkeypatch.setattr(geoent, "geoent_finite", boom)
    assert cli.main(["geoent", "--state", str(state_file), "--L", "2"]) == 2


def test_invariant_exit_code(monkeypatch, state_file):
    def boom(*a, **k):
        raise InvariantViolation("synthetic")

    monkeypatch.setattr(geoent, "geoent_finite", boom)
    assert cli.main(["geoent", "--state", str(state_file), "--L", "2"]) == 3


def test_critical_violation_exit_code(monkeypatch, tmp_path):
    recs = [harness.SweepRecord(1.0, 4, 2, 10.0, 0.9, 0.2, 0.5, 0.3, 0.9)]
    monkeypatch.setattr(harness, "critical_scan", lambda *a, **k: (recs, None, 1))
    assert cli.main(["critical", "--L-list", "2", "--out-dir", str(tmp_path)]) == 3
    assert json.loads((tmp_path / "summary.json").read_text())["violations"] == 1


def test_sweep_is_byte_deterministic(tmp_path):
    base = ["sweep", "--model", "tfim", "--h-min", "2", "--h-max", "3", "--points", "3", "--chi", "6", "--seed", "2"]
    assert cli.main(base + ["--out-dir", str(tmp_path / "a")]) == 0
    assert cli.main(base + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("records.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "plot.svg").exists()


def test_critical_small(tmp_path, capsys):
    code = cli.main(["critical", "--chi", "6", "--L-list", "2,4", "--out-dir", str(tmp_path)])
    assert code == 0
    assert "bound violations = 0" in capsys.readouterr().out
    assert len(harness.read_csv(tmp_path / "records.csv")) == 2


def test_verify_reports_every_family(capsys):
    code = cli.main(["verify", "--corpus-seed", "0", "--states", "6"])
    out = capsys.readouterr().out
    for name in ("canonical residuals", "A(4) = A(2)^2", "weyl sandwich", "E <= E1", "solver vs grid search"):
        assert name in out
    assert code == (3 if "FAIL" in out else 0)


def test_oracle_check(capsys):
    assert cli.main(["oracle-check", "--N", "8", "--L", "1", "--h", "3", "--chi", "6"]) == 0
    assert "relative difference" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "geoentangle", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout
