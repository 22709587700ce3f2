import json

import numpy as np
import pandas as pd
import pytest

import alloop
import bounds
import dataset
import gp
import harness
from alloop import ALTrace
from gp import KernelParams
from harness import ExperimentConfig, OptimalStop
from utils import ConfigError, DataError, make_rng, spawn_seeds


def small_config(tmp_path, **overrides):
    payload = {
        "dataset": {"generator": "artificial", "n": 300},
        "pool_size": 30,
        "replications": 2,
        "criteria": ["proposed", "max_variance"],
        "thresholds": {"max_variance": 0.05},
        "h_grid": [0.1, 0.3, 1.0],
        "beta_grid": [1.0, 10.0, 100.0],
        "hyperparameter_train_size": 100,
        "eta_repeats": 3,
        "eta_train_size": 30,
        "n_jobs": 1,
        "output_dir": str(tmp_path / "out"),
    }
    payload.update(overrides)
    return ExperimentConfig.from_dict(payload)


@pytest.fixture(scope="module")
def standardized():
    return dataset.standardize(dataset.generate_artificial(400, 100.0, seed=5))


@pytest.mark.parametrize("risks, eta, expected", [
    ([0.5, 0.4, 0.3, 0.2], 0.35, OptimalStop(3, False)),
    ([0.5, 0.4, 0.3, 0.2], 0.4, OptimalStop(2, False)),
    ([0.5, 0.4], 0.1, OptimalStop(3, True)),
    ([0.1, 0.9], 0.2, OptimalStop(1, False)),
])
def test_find_optimal_stop(risks, eta, expected):
    assert harness.find_optimal_stop(risks, eta) == expected


def test_find_optimal_stop_empty():
    with pytest.raises(ValueError):
        harness.find_optimal_stop([], 0.1)


def test_stopping_error():
    assert harness.stopping_error(12, 12) == 0
    assert harness.stopping_error(5, 9) == 4
    assert harness.stopping_error(9, 5) == 4
    with pytest.raises(ValueError):
        harness.stopping_error(0, 3)
    assert harness.effective_stop(None, 50) == 50
    assert harness.effective_stop(7, 50) == 7


def test_calibrate_eta_single_repeat_has_no_spread(standardized):
    params = KernelParams(h=0.3, beta=10.0)
    eta = harness.calibrate_eta(standardized, 50, 1, params, seed=4)

    order = make_rng(spawn_seeds(4, 1)[0]).permutation(len(standardized))
    post = gp.fit_posterior(standardized.subset(order[:50]), params)
    expected = bounds.empirical_expected_risk(post, standardized.subset(order[50:]))
    assert eta == pytest.approx(expected, abs=1e-12)


def test_calibrate_eta_decreases_with_training_size(standardized):
    params = KernelParams(h=0.3, beta=10.0)
    small = harness.calibrate_eta(standardized, 10, 5, params, seed=0)
    large = harness.calibrate_eta(standardized, 200, 5, params, seed=0)
    assert large < small


def test_calibrate_eta_searches_grids_per_subset(standardized):
    eta = harness.calibrate_eta(standardized, 50, 2, ([0.1, 0.3], [10.0, 100.0]), seed=1)
    assert np.isfinite(eta)


def test_calibrate_eta_errors(standardized):
    params = KernelParams(h=0.3, beta=10.0)
    with pytest.raises(DataError):
        harness.calibrate_eta(standardized.subset(np.arange(40)), 40, 3, params)
    with pytest.raises(ValueError):
        harness.calibrate_eta(standardized, 50, 0, params)


def test_calibrate_ground_truth_threshold(standardized):
    params = KernelParams(h=0.3, beta=10.0)
    subset = standardized.subset(np.arange(150))
    one = harness.calibrate_ground_truth_threshold(subset, params, 1, seed=2)
    several = harness.calibrate_ground_truth_threshold(subset, params, 4, seed=2)
    assert one > 0.0
    assert np.isfinite(several)
    with pytest.raises(ValueError):
        harness.calibrate_ground_truth_threshold(subset, params, 0)


def test_best_threshold_prefers_the_smaller_on_ties():
    assert harness.best_threshold([0.1, 0.2, 0.3], [2.0, 1.0, 1.0]) == 0.2
    assert harness.best_threshold([0.3, 0.2, 0.1], [1.0, 1.0, 4.0]) == 0.2


def recorded_trace(statistics):
    return ALTrace(chosen_indices=list(range(len(statistics))), statistics={"max_variance": statistics})


def test_scan_thresholds_matches_brute_force():
    traces = [(recorded_trace([0.9, 0.5, 0.2, 0.1]), 3), (recorded_trace([0.7, 0.6, 0.4, 0.35]), 2)]
    grid = [0.05, 0.3, 0.65, 1.0]
    scores = harness.scan_thresholds("max_variance", traces, grid)

    expected = []
    for threshold in grid:
        errors = []
        for trace, t_opt in traces:
            stop = next((step for step, value in enumerate(trace.statistics["max_variance"], 1) if value < threshold),
                        trace.n_steps)
            errors.append(abs(stop - t_opt))
        expected.append(np.mean(errors))
    np.testing.assert_allclose(scores, expected)
    np.testing.assert_allclose(scores, [1.5, 1.0, 0.5, 1.5])
    assert harness.best_threshold(grid, scores) == 0.65


def test_failed_replication_is_reported_and_left_out(tmp_path, monkeypatch):
    cfg = small_config(tmp_path, replications=3, eta=0.5)
    failing_seed = spawn_seeds(cfg.seed, cfg.replications)[1]
    original = alloop.run_active_learning

    def flaky_run(*args, **kwargs):
        if kwargs["seed"] == failing_seed:
            raise RuntimeError("factorization blew up")
        return original(*args, **kwargs)

    monkeypatch.setattr(alloop, "run_active_learning", flaky_run)
    report = harness.run_experiment(cfg, verbose=False)

    assert report.errored_count == 1
    assert [record["replication"] for record in report.records] == [0, 2]
    assert report.errored[0]["replication"] == 1
    assert "factorization blew up" in report.errored[0]["error"]
    for values in report.aggregates.values():
        assert values["count"] == 2
    out = tmp_path / "out"
    assert json.loads((out / "report.json").read_text())["errored_count"] == 1
    assert not (out / "trace_1.csv").exists()


def test_aggregates_are_mean_and_stderr_of_the_records(tmp_path):
    cfg = small_config(tmp_path, replications=3)
    report = harness.run_experiment(cfg, verbose=False, write=False)
    for kind in cfg.criteria:
        errors = np.array([record["e_stop"][kind] for record in report.records], dtype=float)
        assert report.aggregates[kind]["mean_e_stop"] == pytest.approx(errors.mean())
        assert report.aggregates[kind]["stderr"] == pytest.approx(errors.std(ddof=1) / np.sqrt(len(errors)))


def test_calibrated_eta_exceeds_the_risk_of_a_well_trained_model(standardized):
    params = KernelParams(h=0.3, beta=10.0)
    eta = harness.calibrate_eta(standardized, 30, 5, params, seed=0)
    post = gp.fit_posterior(standardized.subset(np.arange(300)), params)
    assert eta > bounds.empirical_expected_risk(post, standardized.subset(np.arange(300, 400)))


def test_scan_thresholds_agrees_with_live_runs(standardized):
    params = KernelParams(h=0.3, beta=10.0)
    loss_range = bounds.LossRange.from_targets(standardized.targets)
    splits = [(seed, *dataset.split_pool(standardized, 30, seed)) for seed in (1, 2)]

    def run(pool, test, seed, threshold):
        criteria = [alloop.CriterionConfig("max_variance", threshold=threshold)]
        return alloop.run_active_learning(pool, test, params, criteria, loss_range, seed=seed)

    recorded = [run(pool, test, seed, 0.0) for seed, pool, test in splits]
    eta = float(np.median(recorded[0].test_risk))
    traces = [(trace, harness.find_optimal_stop(trace.test_risk, eta).t_opt) for trace in recorded]
    grid = list(np.nanquantile(recorded[0].statistics["max_variance"], [0.2, 0.5, 0.8]))

    scores = harness.scan_thresholds("max_variance", traces, grid)
    for threshold, score in zip(grid, scores):
        errors = []
        for (seed, pool, test), (_, t_opt) in zip(splits, traces):
            live = run(pool, test, seed, threshold)
            stop = harness.effective_stop(live.stop_steps["max_variance"], live.n_steps)
            errors.append(harness.stopping_error(stop, t_opt))
        assert score == pytest.approx(np.mean(errors))


def test_calibrate_threshold_rejects_proposed(tmp_path):
    cfg = small_config(tmp_path)
    with pytest.raises(ValueError):
        harness.calibrate_threshold(cfg, "proposed")
    with pytest.raises(ValueError):
        harness.calibrate_threshold(cfg, "ground_truth")


def test_grid_values():
    np.testing.assert_allclose(harness.grid_values({"low": 0.1, "high": 10.0, "count": 3}), [0.1, 1.0, 10.0])
    assert harness.grid_values([1, 2]) == [1.0, 2.0]
    with pytest.raises(ValueError):
        harness.grid_values([])


@pytest.mark.parametrize("overrides", [
    {"bogus": 1},
    {"replications": 0},
    {"pool_size": 1},
    {"criteria": ["proposed", "entropy"]},
    {"criteria": []},
    {"primary_criterion": "pac_bayes"},
    {"alpha": 0.5},
    {"eta": "sometimes"},
    {"thresholds": {"max_variance": "high"}},
    {"dataset": {"name": "artificial"}},
    {"h_grid": [0.0, 1.0]},
])
def test_experiment_config_errors(tmp_path, overrides):
    with pytest.raises(ConfigError):
        small_config(tmp_path, **overrides)


def test_experiment_config_merges_threshold_dicts(tmp_path):
    cfg = small_config(tmp_path, criteria=["proposed", "pac_bayes", "max_variance"])
    assert cfg.thresholds["max_variance"] == 0.05
    assert cfg.thresholds["pac_bayes"] == "calibrate"
    assert cfg.threshold_range("pac_bayes")[0] > 0
    assert json.loads(json.dumps(cfg.to_dict()))["pool_size"] == 30


def test_run_experiment_writes_outputs(tmp_path):
    cfg = small_config(tmp_path)
    report = harness.run_experiment(cfg, verbose=False)
    assert report.errored_count == 0
    assert len(report.records) == 2
    for record in report.records:
        for kind in cfg.criteria:
            assert record["e_stop"][kind] == abs(record["stop_steps"][kind] - record["t_opt"])
            assert 1 <= record["stop_steps"][kind] <= record["n_steps"]

    out = tmp_path / "out"
    payload = json.loads((out / "report.json").read_text())
    assert payload["errored_count"] == 0
    assert set(payload["aggregates"]) == {"proposed", "max_variance"}
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == ["criterion", "mean_e_stop", "stderr"]
    trace = pd.read_csv(out / "trace_0.csv")
    assert list(trace["step"]) == list(range(1, len(trace) + 1))
    assert {"r_t", "kl_t", "z", "test_risk", "fired_proposed", "fired_max_variance"} <= set(trace.columns)


def test_single_replication_has_zero_stderr(tmp_path):
    report = harness.run_experiment(small_config(tmp_path, replications=1), verbose=False, write=False)
    for values in report.aggregates.values():
        assert values["stderr"] == 0.0
        assert values["count"] == 1


def test_run_experiment_is_reproducible(tmp_path):
    first = harness.run_experiment(small_config(tmp_path), verbose=False, write=False)
    second = harness.run_experiment(small_config(tmp_path), verbose=False, write=False)
    assert first.aggregates == second.aggregates
    assert first.eta == second.eta


def test_criteria_are_scored_passively(tmp_path):
    alone = harness.run_experiment(small_config(tmp_path, criteria=["proposed"], eta=0.5), verbose=False, write=False)
    together = harness.run_experiment(small_config(tmp_path, eta=0.5), verbose=False, write=False)
    assert [r["stop_steps"]["proposed"] for r in alone.records] == \
        [r["stop_steps"]["proposed"] for r in together.records]
    assert [r["t_opt"] for r in alone.records] == [r["t_opt"] for r in together.records]


def test_primary_criterion_ends_the_run(tmp_path):
    cfg = small_config(tmp_path, primary_criterion="max_variance", thresholds={"max_variance": 10.0})
    report = harness.run_experiment(cfg, verbose=False, write=False)
    assert all(record["n_steps"] == 1 for record in report.records)


def test_thresholds_are_calibrated_when_requested(tmp_path):
    cfg = small_config(tmp_path, thresholds={"max_variance": "calibrate"}, threshold_grid_count=5,
                       threshold_ranges={"max_variance": [0.001, 0.5]})
    report = harness.run_experiment(cfg, verbose=False, write=False)
    assert report.thresholds["max_variance"] in np.linspace(0.001, 0.5, 5)


def test_run_experiment_needs_a_test_set(tmp_path):
    with pytest.raises(DataError):
        harness.run_experiment(small_config(tmp_path, dataset={"generator": "artificial", "n": 30}), verbose=False)


def test_trace_rows():
    pool = dataset.standardize(dataset.generate_sign_wave(40, seed=3))
    trace = alloop.run_active_learning(
        pool, None, KernelParams(h=0.2, beta=10.0),
        [alloop.CriterionConfig("proposed", alpha=0.001, min_sequence_length=10)],
        bounds.LossRange(0.0, 2.0), max_steps=12)
    rows = harness.trace_rows(trace)
    assert len(rows) == 12
    assert rows[0]["z"] is None and rows[0]["test_risk"] is None
    assert rows[11]["z"] is not None


@pytest.mark.slow
def test_proposed_criterion_beats_the_pac_bayes_baseline(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "dataset": {"generator": "artificial", "n": 1000},
        "pool_size": 50,
        "replications": 20,
        "criteria": ["proposed", "pac_bayes"],
        "output_dir": str(tmp_path),
    })
    report = harness.run_experiment(cfg, verbose=False, write=False)
    assert report.aggregates["proposed"]["mean_e_stop"] <= 7.0
    assert report.aggregates["proposed"]["mean_e_stop"] < report.aggregates["pac_bayes"]["mean_e_stop"]
