import io
import json

import numpy as np
import pytest

import dataset
import main
import runstest
from config_loader import config
from utils import EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_OK


def write_values(tmp_path, values, name="values.txt"):
    path = tmp_path / name
    path.write_text("\n".join(str(value) for value in values) + "\n")
    return str(path)


def test_runstest_from_file(tmp_path, capsys):
    path = write_values(tmp_path, np.linspace(10.0, 1.0, 20))
    assert main.main(["--quiet", "runstest", path, "--alpha", "0.001"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["u"] == 2
    assert payload["reject_randomness"] is True
    assert payload["mode"] == "exact"
    assert (payload["t0"], payload["t1"]) == (10, 10)
    assert payload["bits"] == "1" * 10 + "0" * 10


def test_runstest_normal_mode(tmp_path, capsys):
    path = write_values(tmp_path, [1, 5, 2, 6, 3, 7, 4, 8, 0, 9])
    assert main.main(["--quiet", "runstest", path, "--mode", "normal", "--alpha", "0.01"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["mode"] == "normal"
    assert 0.0 <= payload["p_value"] <= 1.0


def test_runstest_reads_stdin(monkeypatch, capsys):
    monkeypatch.setattr("sys.stdin", io.StringIO("3\n1\n4\n1\n5\n9\n2\n6\n"))
    assert main.main(["--quiet", "runstest"]) == EXIT_OK
    assert "p_value" in json.loads(capsys.readouterr().out)


def test_runstest_missing_file(tmp_path):
    assert main.main(["--quiet", "runstest", str(tmp_path / "missing.txt")]) == EXIT_DATA_ERROR


def test_runstest_bad_line(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("1.0\n2.0\nthree\n")
    assert main.main(["--quiet", "runstest", str(path)]) == EXIT_DATA_ERROR
    assert "Line 3" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["runstest", "--mode", "fuzzy"],
    ["calibrate-threshold", "--criterion", "proposed"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_with_config_error(argv):
    with pytest.raises(SystemExit) as excinfo:
        main.main(argv)
    assert excinfo.value.code == EXIT_CONFIG_ERROR


def test_generate_writes_exact_values(tmp_path):
    output = str(tmp_path / "signwave.csv")
    argv = ["--quiet", "generate", "--name", "signwave", "--n", "25", "--seed", "3", "--output", output]
    assert main.main(argv) == EXIT_OK
    written = dataset.load_table(output, "y")
    expected = dataset.generate_sign_wave(25, seed=3)
    np.testing.assert_array_equal(written.inputs, expected.inputs)
    np.testing.assert_array_equal(written.targets, expected.targets)


def test_run_with_missing_config_file(tmp_path):
    assert main.main(["--quiet", "run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG_ERROR


def test_run_with_unknown_config_field(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"pool_size": 30, "colour": "blue"}))
    assert main.main(["--quiet", "run", "--config", str(path)]) == EXIT_CONFIG_ERROR


def test_run_with_missing_dataset_file(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"dataset": {"path": str(tmp_path / "absent.csv")}, "replications": 1}))
    assert main.main(["--quiet", "run", "--config", str(path)]) == EXIT_DATA_ERROR


def test_run_small_experiment(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({
        "dataset": {"generator": "artificial", "n": 200},
        "pool_size": 20,
        "replications": 1,
        "criteria": ["proposed", "max_variance"],
        "thresholds": {"max_variance": 0.05},
        "h_grid": [0.1, 0.3],
        "beta_grid": [10.0, 100.0],
        "eta_repeats": 2,
        "eta_train_size": 20,
    }))
    output_dir = tmp_path / "results"
    assert main.main(["--quiet", "run", "--config", str(path), "--output-dir", str(output_dir)]) == EXIT_OK
    assert (output_dir / "report.json").exists()
    assert (output_dir / "summary.csv").exists()


def test_runstest_output_matches_analyze_sequence(tmp_path, capsys):
    values = [0.4, 2.5, 1.1, 3.3, 0.2, 2.9, 1.7, 0.8, 3.1, 1.4, 2.2, 0.6]
    path = write_values(tmp_path, values)
    assert main.main(["--quiet", "runstest", path, "--alpha", "0.05"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    report = runstest.analyze_sequence(values, 0.05, config.RUNS_TEST_MODE, config.RUNS_TEST_SIDED, config.EXACT_MAX_LENGTH)
    expected = runstest.report_to_dict(report)
    assert {key: payload[key] for key in expected} == expected
