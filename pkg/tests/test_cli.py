import json

import pandas as pd
import pytest

from app.main import main

ROC_ARGS = ["roc", "--k", "4", "--n", "20", "--snr-db", "0", "--trials", "400",
            "--seed", "11", "--detectors", "ST,ER"]


def test_threshold_command(capsys):
    """Test the threshold is printed for a valid false-alarm rate."""
    assert main(["threshold", "--k", "2", "--n", "2", "--pfa", "0.5"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1 - 0.5 ** (2.0 / 3.0), rel=1e-10)


def test_threshold_rejects_bad_pfa(capsys):
    """Test pfa at the boundary exits with a usage error."""
    assert main(["threshold", "--k", "4", "--n", "100", "--pfa", "0"]) == 2
    assert "pfa must lie in (0,1)" in capsys.readouterr().err


def test_pfa_command(capsys):
    """Test the forward false-alarm computation."""
    assert main(["pfa", "--k", "2", "--n", "2", "--zeta", "1"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.0)


def test_moments_command(capsys):
    """Test moments and Beta parameters for K=2, N=4."""
    assert main(["moments", "--k", "2", "--n", "4"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "M1 = 0.6666667" in out
    assert "alpha = 3" in out
    assert "beta = 1.5" in out


def test_moments_command_with_covariance(capsys):
    """Test H1 moments are reported when Σ is given."""
    assert main(["moments", "--k", "2", "--n", "10", "--sigma-eigs", "3", "1"]) == 0
    out = capsys.readouterr().out
    assert "sigma_eigs = 3 1" in out
    assert "alpha1 = " in out


def test_roc_command_is_deterministic(tmp_path):
    """Test two runs with the same seed give byte-identical CSV."""
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(ROC_ARGS + ["--out", str(first)]) == 0
    assert main(ROC_ARGS + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert b"\r\n" not in first.read_bytes()

    frame = pd.read_csv(first)
    assert list(frame.columns) == ["detector", "source", "pfa", "pd"]
    assert set(frame["detector"]) == {"ST", "ER"}
    assert set(frame.loc[frame["detector"] == "ST", "source"]) == {"analytic", "empirical"}


def test_config_round_trip(tmp_path):
    """Test a saved config reproduces the same output."""
    config, first, second = tmp_path / "run.json", tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(ROC_ARGS + ["--out", str(first), "--save-config", str(config)]) == 0
    saved = json.loads(config.read_text())
    assert saved["scenario"]["K"] == 4
    assert saved["scenario"]["detectors"] == ["ST", "ER"]

    assert main(["roc", "--config", str(config), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_roc_rejects_empty_detectors(capsys):
    """Test an empty detector list is a usage error."""
    assert main(["roc", "--k", "4", "--n", "20", "--detectors", "", "--trials", "100"]) == 2
    assert "error" in capsys.readouterr().err


def test_roc_rejects_unknown_detector(capsys):
    """Test unknown detector names are a usage error."""
    assert main(["roc", "--k", "4", "--n", "20", "--detectors", "ST,FOO", "--trials", "100"]) == 2
    assert "FOO" in capsys.readouterr().err


def test_cdf_command_two_sensors(tmp_path):
    """Test the CDF output carries exact curves for K=2."""
    out = tmp_path / "cdf.csv"
    args = ["cdf", "--k", "2", "--n", "10", "--snr-db", "0", "--trials", "500", "--seed", "2", "--out", str(out)]
    assert main(args) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["hypothesis", "source", "y", "cdf"]
    pairs = set(zip(frame["hypothesis"], frame["source"]))
    assert ("H0", "exact") in pairs
    assert ("H1", "exact") in pairs
    assert ("H1", "empirical") in pairs
    assert frame["cdf"].between(0.0, 1.0).all()


def test_pd_command_json(tmp_path):
    """Test the detection table in JSON form."""
    out = tmp_path / "pd.json"
    args = ["pd", "--k", "4", "--n", "50", "--trials", "500", "--seed", "4",
            "--snr1-db", "0", "--snr1-db", "3", "--pfa-target", "0.05", "--format", "json", "--out", str(out)]
    assert main(args) == 0
    rows = json.loads(out.read_text())
    assert [row["snr1_db"] for row in rows] == [0.0, 3.0]
    assert set(rows[0]) == {"snr1_db", "ST", "JOHN"}


def test_validate_selected_criteria(capsys):
    """Test running analytic criteria by name and number."""
    assert main(["validate", "--only", "beta-params,2"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] beta-params" in out
    assert "[PASS] k2-exactness" in out


def test_validate_rejects_unknown_criterion():
    """Test unknown criteria and a bad scale are usage errors."""
    assert main(["validate", "--only", "nonsense"]) == 2
    assert main(["validate", "--only", "beta-params", "--scale", "0"]) == 2


def test_missing_command():
    """Test argparse usage errors map to exit code 2."""
    assert main([]) == 2


def test_metrics_file_written(tmp_path):
    """Test Prometheus metrics are exported after a simulation."""
    metrics = tmp_path / "metrics.prom"
    args = ["--metrics-file", str(metrics)] + ROC_ARGS + ["--out", str(tmp_path / "roc.csv")]
    assert main(args) == 0
    assert "sensing_simulated_trials" in metrics.read_text()


def test_save_config_rejects_silent_users(tmp_path, capsys):
    """Test an SNR of -inf cannot be written to a JSON config."""
    config = tmp_path / "run.json"
    args = ["roc", "--k", "4", "--n", "20", "--snr-db=-inf", "--trials", "100", "--save-config", str(config)]
    assert main(args) == 2
    assert not config.exists()
    assert "non-finite" in capsys.readouterr().err


def test_channel_mode_round_trip(tmp_path):
    """Test the channel mode flag is stored in the config and reused."""
    config, first, second = tmp_path / "run.json", tmp_path / "a.csv", tmp_path / "b.csv"
    args = ROC_ARGS + ["--snr-db", "-2", "--channel-mode", "orthogonal"]
    assert main(args + ["--out", str(first), "--save-config", str(config)]) == 0
    assert json.loads(config.read_text())["scenario"]["channel_mode"] == "orthogonal"
    assert main(["roc", "--config", str(config), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
