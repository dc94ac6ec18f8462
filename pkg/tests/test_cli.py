import json
import math

import pytest

from qvgauss.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sigma2(capsys):
    code, out, _ = run(capsys, "sigma2", "--family", "sfbm", "--hurst", "0.5", "--theta", "1")
    assert code == 0
    assert float(out) == pytest.approx(1 / math.tanh(1) / 2, abs=1e-12)
    assert len(out.strip().replace(".", "").lstrip("0")) >= 12


def test_cumulants_one_point(capsys):
    code, out, _ = run(capsys, "cumulants", "--family", "sfbm", "--hurst", "0.6", "--theta", "1", "--n", "1")
    assert code == 0
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert float(vals["kappa3"]) == pytest.approx(2 * math.sqrt(2), rel=1e-12)
    assert float(vals["kappa4"]) == pytest.approx(12, rel=1e-12)


def test_parameter_error_exit_2(capsys):
    code, _, err = run(capsys, "ou-cov", "--family", "sfbm", "--hurst", "1.5", "--theta", "1", "--s", "1", "--t", "2")
    assert code == 2 and "ParamOutOfRange" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "kernel", "--family", "fbm", "--hurst", "0.3", "--s", "1", "--t", "2", "--bogus", "1")[0] == 2
    assert run(capsys, "nosuch")[0] == 2
    assert run(capsys)[0] == 2


def test_computation_error_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2\n1,abc\n")
    code, _, err = run(capsys, "estimate", "--input", str(bad), "--family", "sfbm", "--hurst", "0.6")
    assert code == 1 and "FormatError" in err


def test_acf_and_rates_tables(capsys):
    code, out, _ = run(capsys, "acf", "--alpha", "0.5", "--theta", "1", "--max-lag", "2")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "lag,value" and len(lines) == 4
    assert float(lines[3].split(",")[1]) == pytest.approx(math.exp(-2) / 2, abs=1e-12)
    code, out, _ = run(capsys, "rates", "--beta", "0.7", "--n-list", "100,10000")
    assert out.strip().splitlines()[2] == "10000,0.01"


def test_simulate_estimate_roundtrip(capsys, tmp_path):
    path = tmp_path / "s.csv"
    args = ["simulate", "--family", "sfbm", "--hurst", "0.6", "--theta", "1", "--n", "5", "--reps", "3", "--seed", "4"]
    assert run(capsys, *args, "--out", str(path))[0] == 0
    first = path.read_bytes()
    assert run(capsys, *args, "--out", str(path))[0] == 0
    assert path.read_bytes() == first
    assert first.decode().splitlines()[0] == "x1,x2,x3,x4,x5"
    code, out, _ = run(capsys, "estimate", "--input", str(path), "--family", "sfbm", "--hurst", "0.6")
    assert code == 0 and len(out.strip().splitlines()) == 4


def test_kernel_and_ou_cov(capsys):
    code, out, _ = run(capsys, "kernel", "--family", "sfbm", "--hurst", "0.5", "--s", "1", "--t", "2")
    assert code == 0 and float(out) == pytest.approx(1.0)
    code, out, _ = run(capsys, "ou-cov", "--family", "sfbm", "--hurst", "0.5", "--theta", "1", "--s", "2", "--t", "2")
    assert float(out) == pytest.approx((1 - math.exp(-4)) / 2, abs=1e-9)


def test_experiment_deterministic(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    out_csv = tmp_path / "r.csv"
    cfg.write_text(json.dumps({"family": "sfbm", "hurst": 0.6, "theta": 1, "n_list": [20, 40, 80], "reps": 200, "seed": 1, "output": str(out_csv)}))
    code, out1, _ = run(capsys, "experiment", "--config", str(cfg))
    first = out_csv.read_bytes()
    code2, out2, _ = run(capsys, "experiment", "--config", str(cfg))
    assert code == code2 == 0 and out1 == out2 and out_csv.read_bytes() == first
