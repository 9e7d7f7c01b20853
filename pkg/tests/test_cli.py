import numpy as np
import pytest

from ioss_cert.cli import main
from ioss_cert.simulator import read_trajectory


def test_certify_example(tmp_path, capsys):
    assert main(["certify", "examples/sec5.json", "--out-dir", str(tmp_path)]) == 0
    text = (tmp_path / "sec5.cert.txt").read_text()
    assert "overall = CERTIFIED" in text
    assert "tolerance = 1e-09" in text
    assert '"lambda": 0.73' in text  # resolved configuration is echoed
    assert "CERTIFIED" in capsys.readouterr().out


def test_certify_delta17_exit_1_with_c2_witness(tmp_path, capsys):
    assert main(["certify", "examples/sec5_delta2_17.json", "--out-dir", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "C2 witness: walk 2,1 + cycle 1,3,1" in out
    assert "C2 walk 2,1 + cycle 1,3,1" in (tmp_path / "sec5_delta2_17.cert.txt").read_text()


def test_certify_tolerance_flag(tmp_path):
    # the smallest margin is about 5.72, so a tolerance of 6 refutes
    assert main(["certify", "examples/sec5.json", "--tolerance", "6", "--out-dir", str(tmp_path)]) == 1


def test_simulate(tmp_path, capsys):
    rc = main(["simulate", "examples/sec5.json", "--seeds", "3", "--horizon", "5", "--step", "0.01", "--out-dir", str(tmp_path)])
    assert rc == 0
    for k in range(3):
        cols = read_trajectory(tmp_path / f"sec5.seed{k}.csv")
        assert np.all(np.isfinite(cols["x_1"]))
        assert cols["time"][-1] == 5.0
    assert "gamma1" in (tmp_path / "sec5.simulate.txt").read_text()


def test_simulate_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        main(["simulate", "examples/sec5.json", "--seeds", "1", "--horizon", "4", "--step", "0.05", "--out-dir", str(tmp_path / sub)])
    assert (tmp_path / "a" / "sec5.seed0.csv").read_bytes() == (tmp_path / "b" / "sec5.seed0.csv").read_bytes()


def test_stats_and_check(tmp_path, capsys):
    main(["simulate", "examples/sec5.json", "--seeds", "1", "--horizon", "12", "--step", "0.05", "--out-dir", str(tmp_path)])
    capsys.readouterr()
    assert main(["stats", "examples/sec5.json", str(tmp_path / "sec5.seed0.signal.txt")]) == 0
    out = capsys.readouterr().out
    assert "N = " in out and "T[1] = " in out
    bad = tmp_path / "bad.txt"
    bad.write_text("# horizon 10\n0 1\n3.0 2\n")
    assert main(["stats", "examples/sec5.json", str(bad)]) == 1
    assert "below delta" in capsys.readouterr().out


def test_check_assumptions(tmp_path):
    rc = main(["check-assumptions", "examples/sec5.json", "--samples", "500", "--out-dir", str(tmp_path)])
    assert rc == 0
    assert "clean = true" in (tmp_path / "sec5.assumptions.txt").read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["certify", "does/not/exist.json"],
        ["frobnicate"],
        [],
        ["simulate", "examples/sec5.json", "--seeds", "0"],
        ["simulate", "examples/sec5.json", "--start", "9"],
    ],
)
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out-dir", str(tmp_path)] if argv and argv[0] != "frobnicate" else argv) == 2


def test_invalid_spec_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"dims": {"d": 0}, "subsystems": [{"id": 1, "stable": true, "lambda": 1, "delta": 2, "Delta": 1}]}')
    assert main(["certify", str(p), "--out-dir", str(tmp_path)]) == 2
    assert "subsystems[0].Delta" in capsys.readouterr().err
