"""
Experiment runner: eta calibration, optimal stopping points, threshold calibration for
the baseline criteria, replicated experiments and the bound-tightness experiment.
"""
import math
import os
import traceback
from collections import namedtuple
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from joblib import Parallel, delayed

import alloop
import bounds
import dataset
import gp
from config_loader import config
from utils import ConfigError, DataError, mean_and_stderr, make_rng, spawn_seeds, write_csv, write_json

OptimalStop = namedtuple("OptimalStop", ["t_opt", "unreached"])

THRESHOLD_KINDS = ("pac_bayes", "cross_validation", "max_variance", "ground_truth")
SCANNED_KINDS = ("pac_bayes", "cross_validation", "max_variance")


@dataclass
class ExperimentConfig:
    """
    Settings of one replicated experiment.

    Field names double as the keys of the experiment JSON file; every field left out of
    the file falls back to the UPPERCASE setting of the same name in the config.
    """
    dataset: dict = None
    pool_size: int = None
    replications: int = None
    criteria: list = None
    primary_criterion: str = None
    alpha: float = None
    delta: float = None
    kappa: float = None
    cv_folds: int = None
    min_sequence_length: int = None
    runs_test_mode: str = None
    runs_test_sided: str = None
    exact_max_length: int = None
    h_grid: object = None
    beta_grid: object = None
    hyperparameter_train_size: int = None
    refit_hyperparameters: bool = None
    eta: object = None
    eta_repeats: int = None
    eta_train_size: int = None
    thresholds: dict = None
    threshold_ranges: dict = None
    threshold_grid_count: int = None
    ground_truth_bootstrap: int = None
    reference_dataset: dict = None
    max_steps: int = None
    seed: int = None
    n_jobs: int = None
    output_dir: str = None
    csv_significant_digits: int = None

    @classmethod
    def from_dict(cls, payload=None):
        """
        Build a config from a JSON-style dict, filling the gaps from the global config.

        Raises:
            ConfigError: On unknown fields or invalid values.
        """
        payload = dict(payload or {})
        names = [f.name for f in fields(cls)]
        unknown = sorted(set(payload) - set(names))
        if unknown:
            raise ConfigError(f"Unknown experiment config fields: {unknown}")

        values = {}
        for name in names:
            default = getattr(config, name.upper(), None)
            value = payload.get(name, default)
            if name in ("thresholds", "threshold_ranges") and isinstance(value, dict):
                value = {**(default or {}), **value}
            values[name] = value
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if not isinstance(self.dataset, dict) or not ({"generator", "path"} & set(self.dataset)):
            raise ConfigError(f"dataset must be a dict with 'generator' or 'path', got {self.dataset!r}")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError(f"replications must be an integer >= 1, got {self.replications}")
        if not isinstance(self.pool_size, int) or self.pool_size < 2:
            raise ConfigError(f"pool_size must be an integer >= 2, got {self.pool_size}")
        if self.max_steps is not None and not 1 <= self.max_steps <= self.pool_size:
            raise ConfigError(f"max_steps must be in [1, pool_size], got {self.max_steps}")
        unknown = [kind for kind in self.criteria if kind not in alloop.KINDS]
        if unknown or not self.criteria:
            raise ConfigError(f"criteria must be a non-empty subset of {alloop.KINDS}, got {self.criteria}")
        if self.primary_criterion is not None and self.primary_criterion not in self.criteria:
            raise ConfigError(f"primary_criterion '{self.primary_criterion}' is not in criteria")
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"delta must be in (0, 1], got {self.delta}")
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if not isinstance(self.cv_folds, int) or self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be an integer >= 2, got {self.cv_folds}")
        if not (self.eta == "calibrate" or _is_number(self.eta)):
            raise ConfigError(f"eta must be a number or 'calibrate', got {self.eta!r}")

        for kind in THRESHOLD_KINDS:
            if kind not in self.criteria:
                continue
            value = self.thresholds.get(kind, "calibrate")
            if value == "calibrate":
                if kind in SCANNED_KINDS:
                    low, high = self.threshold_range(kind)
                    if not 0 < low < high:
                        raise ConfigError(f"threshold range for {kind} must be a positive interval, got [{low}, {high}]")
                    if self.threshold_grid_count < 2:
                        raise ConfigError(f"threshold_grid_count must be >= 2, got {self.threshold_grid_count}")
            elif not _is_number(value):
                raise ConfigError(f"threshold for {kind} must be a number or 'calibrate', got {value!r}")

        for name in ("h_grid", "beta_grid"):
            try:
                grid_values(getattr(self, name))
            except (TypeError, ValueError, KeyError) as e:
                raise ConfigError(f"invalid {name}: {e}") from e

    def threshold_range(self, kind):
        try:
            low, high = self.threshold_ranges[kind]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"threshold_ranges needs a [low, high] entry for {kind}") from e
        return float(low), float(high)

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentReport:
    """
    Outcome of run_experiment.

    records hold one dict per successful replication (stop_steps, t_opt, e_stop per
    criterion); aggregates hold mean and standard error of e_stop per criterion.
    """
    config: dict
    params: dict
    eta: float
    thresholds: dict
    records: list = field(default_factory=list)
    errored: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    mean_test_risk: list = field(default_factory=list)

    @property
    def errored_count(self):
        return len(self.errored)

    def to_dict(self):
        payload = asdict(self)
        payload["errored_count"] = self.errored_count
        return payload


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and not math.isnan(value)


def grid_values(grid):
    """A hyperparameter grid given either as an explicit list or as {"low", "high", "count"}."""
    if isinstance(grid, dict):
        return gp.log_grid(grid["low"], grid["high"], grid["count"])
    values = [float(value) for value in grid]
    if not values or min(values) <= 0:
        raise ValueError("grid values must be non-empty and positive")
    return values


def fit_hyperparameters(ds, h_grid, beta_grid, train_size=None, seed=0):
    """
    Marginal-likelihood grid search on a dataset, on a random subset when train_size is smaller.
    """
    if train_size is not None and train_size < len(ds):
        ds = ds.subset(make_rng(seed).choice(len(ds), int(train_size), replace=False))
    return gp.optimize_hyperparameters(ds, grid_values(h_grid), grid_values(beta_grid))


def _sd(values):
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def calibrate_eta(ds, train_size, repeats, params_grid, seed=0):
    """
    Test-risk level that defines t_opt: mean + 2 sd of the expected test risk of models
    trained on random subsets of `train_size` rows and evaluated on the rest.

    Args:
        ds (LabeledDataset): Standardized dataset.
        train_size (int): Rows per training subset.
        repeats (int): Number of random subsets.
        params_grid: Either fixed KernelParams or a (h_grid, beta_grid) pair searched per subset.
        seed (int): Root seed.

    Raises:
        DataError: If the dataset leaves no test rows after taking train_size.
    """
    if int(repeats) != repeats or repeats < 1:
        raise ValueError(f"repeats must be a positive integer, got {repeats}")
    if int(train_size) != train_size or train_size < 1:
        raise ValueError(f"train_size must be a positive integer, got {train_size}")
    if len(ds) <= train_size:
        raise DataError(f"eta calibration needs more than {train_size} rows, got {len(ds)}")

    risks = []
    for child_seed in spawn_seeds(seed, int(repeats)):
        order = make_rng(child_seed).permutation(len(ds))
        train, test = ds.subset(order[:int(train_size)]), ds.subset(order[int(train_size):])
        if isinstance(params_grid, gp.KernelParams):
            params = params_grid
        else:
            params = gp.optimize_hyperparameters(train, *params_grid)
        risks.append(bounds.empirical_expected_risk(gp.fit_posterior(train, params), test))
    return float(np.mean(risks) + 2.0 * _sd(risks))


def find_optimal_stop(per_step_test_risk, eta):
    """
    Smallest step whose test risk is at most eta.

    Returns:
        OptimalStop: (t_opt, unreached). When no step reaches eta, t_opt is the list
        length + 1 and unreached is True.
    """
    risks = list(per_step_test_risk)
    if not risks:
        raise ValueError("the test-risk list is empty")
    for step, risk in enumerate(risks, start=1):
        if risk <= eta:
            return OptimalStop(step, False)
    return OptimalStop(len(risks) + 1, True)


def stopping_error(stop_step, t_opt):
    """e_stop = |stop_step - t_opt|."""
    if stop_step < 1 or t_opt < 1:
        raise ValueError(f"steps must be positive, got stop_step={stop_step}, t_opt={t_opt}")
    return abs(int(stop_step) - int(t_opt))


def effective_stop(stop_step, n_steps):
    """A criterion that never fired stopped when the run ran out of steps."""
    return n_steps if stop_step is None else stop_step


def calibrate_ground_truth_threshold(ds, params, repeats, seed=0):
    """
    Bootstrap threshold for the ground-truth criterion: mean - 2 sd of the test-risk
    improvement over the prior of models fit on bootstrap resamples of the full data.
    """
    if int(repeats) != repeats or repeats < 1:
        raise ValueError(f"repeats must be a positive integer, got {repeats}")
    prior_risk = alloop.prior_expected_risk(params, ds)
    improvements = []
    for child_seed in spawn_seeds(seed, int(repeats)):
        resample = make_rng(child_seed).integers(0, len(ds), len(ds))
        post = gp.fit_posterior(ds.subset(resample), params)
        improvements.append(alloop.risk_improvement(prior_risk, post, ds))
    return float(np.mean(improvements) - 2.0 * _sd(improvements))


def build_criteria(cfg, thresholds, loss_range, kinds=None):
    """CriterionConfig objects for the configured kinds, thresholds already resolved."""
    criteria = []
    for kind in kinds or cfg.criteria:
        if kind == "proposed":
            criteria.append(alloop.CriterionConfig(
                "proposed", alpha=cfg.alpha, min_sequence_length=cfg.min_sequence_length,
                mode=cfg.runs_test_mode, sided=cfg.runs_test_sided, exact_max_length=cfg.exact_max_length,
            ))
        elif kind == "pac_bayes":
            criteria.append(alloop.CriterionConfig(
                "pac_bayes", threshold=thresholds[kind], delta=cfg.delta, kappa=cfg.kappa, loss_range=loss_range,
            ))
        elif kind == "cross_validation":
            criteria.append(alloop.CriterionConfig("cross_validation", threshold=thresholds[kind], folds=cfg.cv_folds))
        else:
            criteria.append(alloop.CriterionConfig(kind, threshold=thresholds[kind]))
    return criteria


class _ExperimentContext:
    """Datasets, hyperparameters and seeds shared by every replication of one experiment."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.base = dataset.load_dataset_source(cfg.dataset, seed=cfg.seed)
        if len(self.base) <= cfg.pool_size:
            raise DataError(f"the dataset has {len(self.base)} rows; pool_size {cfg.pool_size} leaves no test set")
        self.params = fit_hyperparameters(
            self.base, cfg.h_grid, cfg.beta_grid, cfg.hyperparameter_train_size, cfg.seed)
        self.refit_grids = (grid_values(cfg.h_grid), grid_values(cfg.beta_grid)) if cfg.refit_hyperparameters else None

    def replication_data(self, seed, source=None):
        """Fresh (pool, test, loss range) for one replication."""
        source = source or self.cfg.dataset
        if "generator" in source:
            full = dataset.load_dataset_source(source, seed=seed)
        elif source is self.cfg.dataset:
            full = self.base
        else:
            full = dataset.load_dataset_source(source, seed=seed)
        pool, test = dataset.split_pool(full, self.cfg.pool_size, seed)
        return pool, test, bounds.LossRange.from_targets(full.targets)

    def run(self, pool, test, loss_range, thresholds, seed, kinds=None, primary=None, verbose=False):
        return alloop.run_active_learning(
            pool, test, self.params, build_criteria(self.cfg, thresholds, loss_range, kinds), loss_range,
            max_steps=self.cfg.max_steps, seed=seed, primary=primary, refit_grids=self.refit_grids,
            verbose=verbose,
        )


def _reference_traces(context, kinds, eta, seed, verbose=False):
    """AL traces on the reference data with the given criteria recorded passively."""
    cfg = context.cfg
    placeholder = {kind: 0.0 for kind in kinds}
    traces = []
    for child_seed in spawn_seeds(seed, cfg.replications):
        pool, test, loss_range = context.replication_data(child_seed, cfg.reference_dataset)
        trace = context.run(pool, test, loss_range, placeholder, child_seed, kinds=kinds)
        traces.append((trace, find_optimal_stop(trace.test_risk, eta).t_opt))
    if verbose:
        print(f"[+] Recorded {len(traces)} reference traces for threshold calibration.")
    return traces


def scan_thresholds(kind, traces, grid):
    """
    Mean e_stop at every threshold in grid, rescanning the recorded statistics.

    Args:
        kind (str): Criterion kind.
        traces (list): (ALTrace, t_opt) pairs.
        grid (array-like): Candidate thresholds.

    Returns:
        np.ndarray: Mean e_stop per threshold.
    """
    scores = np.zeros(len(grid))
    for i, threshold in enumerate(grid):
        errors = []
        for trace, t_opt in traces:
            stop = alloop.first_firing_step(kind, trace.statistics[kind], threshold)
            errors.append(stopping_error(effective_stop(stop, trace.n_steps), t_opt))
        scores[i] = np.mean(errors)
    return scores


def best_threshold(grid, scores):
    """Threshold with the smallest score, the smaller threshold on ties."""
    order = np.lexsort((np.asarray(grid, dtype=float), np.asarray(scores, dtype=float)))
    return float(np.asarray(grid, dtype=float)[order[0]])


def calibrate_threshold(cfg, kind, value_range=None, grid_count=None, replications=None, seed=None,
                        eta=None, context=None, verbose=None):
    """
    Threshold minimizing the mean stopping error on the reference data.

    One set of AL traces is recorded and every threshold of an equally spaced grid over
    value_range re-scans their per-step statistics.

    Args:
        cfg (ExperimentConfig): Experiment settings; reference_dataset selects the data.
        kind (str): pac_bayes, cross_validation or max_variance.
        value_range (tuple): (low, high); defaults to cfg.threshold_ranges[kind].
        grid_count (int): Number of grid points, at least 2.
        replications (int): Reference traces to record; defaults to cfg.replications.
        seed (int): Seed of the reference traces.
        eta (float): Test-risk level for t_opt; calibrated when None.

    Raises:
        ValueError: For the proposed criterion or an invalid grid.
    """
    if kind == "proposed":
        raise ValueError("the proposed criterion has no threshold to calibrate")
    if kind not in SCANNED_KINDS:
        raise ValueError(f"cannot scan thresholds for criterion '{kind}'")
    verbose = config.VERBOSE if verbose is None else verbose
    if replications is not None:
        cfg = ExperimentConfig(**{**cfg.to_dict(), "replications": int(replications)})
    seed = cfg.seed + 1 if seed is None else seed
    low, high = value_range if value_range is not None else cfg.threshold_range(kind)
    grid_count = cfg.threshold_grid_count if grid_count is None else int(grid_count)
    if not 0 < low < high or grid_count < 2:
        raise ValueError(f"invalid threshold grid [{low}, {high}] x {grid_count}")

    context = context or _ExperimentContext(cfg)
    if eta is None:
        eta = resolve_eta(cfg, context)
    traces = _reference_traces(context, [kind], eta, seed, verbose)
    grid = np.linspace(low, high, grid_count)
    threshold = best_threshold(grid, scan_thresholds(kind, traces, grid))
    if verbose:
        print(f"[+] Calibrated {kind} threshold: {threshold:.6g}")
    return threshold


def resolve_eta(cfg, context):
    if cfg.eta != "calibrate":
        return float(cfg.eta)
    return calibrate_eta(context.base, cfg.eta_train_size, cfg.eta_repeats, context.params, cfg.seed)


def resolve_thresholds(cfg, context, eta, verbose=False):
    """Fixed thresholds from the config, calibrated values for every 'calibrate' entry."""
    thresholds = {}
    scanned = []
    for kind in cfg.criteria:
        if kind not in THRESHOLD_KINDS:
            continue
        value = cfg.thresholds.get(kind, "calibrate")
        if value != "calibrate":
            thresholds[kind] = float(value)
        elif kind == "ground_truth":
            thresholds[kind] = calibrate_ground_truth_threshold(
                context.base, context.params, cfg.ground_truth_bootstrap, cfg.seed)
        else:
            scanned.append(kind)

    if scanned:
        traces = _reference_traces(context, scanned, eta, cfg.seed + 1, verbose)
        for kind in scanned:
            grid = np.linspace(*cfg.threshold_range(kind), cfg.threshold_grid_count)
            thresholds[kind] = best_threshold(grid, scan_thresholds(kind, traces, grid))
    if verbose:
        for kind, value in thresholds.items():
            print(f"[+] Threshold for {kind}: {value:.6g}")
    return thresholds


def trace_rows(trace):
    """Per-step rows of a trace, the data behind bound and test-risk plots."""
    rows = []
    bound_trace = trace.bound_trace
    for i in range(trace.n_steps):
        row = {
            "step": i + 1,
            "r_t": bound_trace.r_values[i],
            "kl_t": bound_trace.kl_values[i],
            "z": bound_trace.decisions[i].z if bound_trace.decisions[i] is not None else None,
            "test_risk": trace.test_risk[i] if i < len(trace.test_risk) else None,
        }
        for kind, flags in trace.fired.items():
            row[f"fired_{kind}"] = flags[i]
        rows.append(row)
    return rows


def _run_replication(context, thresholds, eta, replication, seed, verbose):
    cfg = context.cfg
    try:
        pool, test, loss_range = context.replication_data(seed)
        trace = context.run(pool, test, loss_range, thresholds, seed, primary=cfg.primary_criterion)
        optimum = find_optimal_stop(trace.test_risk, eta)
        stop_steps = {kind: effective_stop(trace.stop_steps[kind], trace.n_steps) for kind in cfg.criteria}
        record = {
            "replication": replication,
            "seed": seed,
            "n_steps": trace.n_steps,
            "t_opt": optimum.t_opt,
            "eta_unreached": optimum.unreached,
            "stop_steps": stop_steps,
            "fired": {kind: trace.stop_steps[kind] is not None for kind in cfg.criteria},
            "e_stop": {kind: stopping_error(stop_steps[kind], optimum.t_opt) for kind in cfg.criteria},
            "test_risk": list(trace.test_risk),
        }
        if verbose:
            print(f"[+] Replication {replication}: t_opt {optimum.t_opt}, stops {stop_steps}")
        return record, trace_rows(trace), None
    except Exception as e:
        if verbose:
            traceback.print_exc()
        else:
            print(f"[-] Replication {replication} failed: {e}")
        return None, None, {"replication": replication, "seed": seed, "error": f"{type(e).__name__}: {e}"}


def aggregate(records, kinds):
    """Mean and standard error of e_stop per criterion over the successful replications."""
    result = {}
    for kind in kinds:
        mean, stderr = mean_and_stderr([record["e_stop"][kind] for record in records])
        result[kind] = {"mean_e_stop": mean, "stderr": stderr, "count": len(records)}
    return result


def mean_risk_curve(records):
    """Per-step test risk averaged over the replications that reached that step."""
    length = max((len(record["test_risk"]) for record in records), default=0)
    curve = []
    for i in range(length):
        values = [record["test_risk"][i] for record in records if i < len(record["test_risk"])]
        curve.append(float(np.mean(values)))
    return curve


def write_report(report, trace_tables, output_dir, digits=6):
    """Write summary.csv and one trace_<rep>.csv per replication, then report.json last."""
    summary = [{"criterion": kind, **values} for kind, values in report.aggregates.items()]
    write_csv(os.path.join(output_dir, "summary.csv"), summary, ["criterion", "mean_e_stop", "stderr"], digits)
    for replication, rows in trace_tables.items():
        if rows:
            write_csv(os.path.join(output_dir, f"trace_{replication}.csv"), rows, list(rows[0].keys()), digits)
    write_json(os.path.join(output_dir, "report.json"), report.to_dict())


def run_experiment(cfg, verbose=None, write=True):
    """
    Run the replicated experiment described by cfg.

    Every replication draws a fresh pool/test split (and fresh data for generated
    sources), records one AL trace with all criteria scored passively, and measures
    e_stop against t_opt. Replications that raise are reported and left out of the
    aggregates.

    Args:
        cfg (ExperimentConfig): Experiment settings.
        verbose (bool): Progress output; defaults to config.VERBOSE.
        write (bool): Write the report files to cfg.output_dir.

    Returns:
        ExperimentReport: Records, aggregates and the averaged test-risk curve.
    """
    verbose = config.VERBOSE if verbose is None else verbose
    context = _ExperimentContext(cfg)
    if verbose:
        print(f"[+] Hyperparameters: h={context.params.h:.4g}, beta={context.params.beta:.4g}")

    eta = resolve_eta(cfg, context)
    if verbose:
        print(f"[+] eta = {eta:.6g}")
    thresholds = resolve_thresholds(cfg, context, eta, verbose)

    seeds = spawn_seeds(cfg.seed, cfg.replications)
    outcomes = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_run_replication)(context, thresholds, eta, replication, seed, verbose)
        for replication, seed in enumerate(seeds)
    )

    records = [record for record, _, error in outcomes if error is None]
    errored = [error for _, _, error in outcomes if error is not None]
    trace_tables = {record["replication"]: rows for record, rows, error in outcomes if error is None}
    if errored:
        print(f"[!] {len(errored)} of {cfg.replications} replications failed and were excluded.")

    report = ExperimentReport(
        config=cfg.to_dict(),
        params={"h": context.params.h, "beta": context.params.beta},
        eta=eta,
        thresholds=thresholds,
        records=records,
        errored=errored,
        aggregates=aggregate(records, cfg.criteria),
        mean_test_risk=mean_risk_curve(records),
    )
    if write:
        write_report(report, trace_tables, cfg.output_dir, cfg.csv_significant_digits)
        if verbose:
            print(f"[+] Wrote the report to {cfg.output_dir}")
    if verbose:
        for kind, values in report.aggregates.items():
            print(f"    {kind:<18} e_stop {values['mean_e_stop']:.3f} +- {values['stderr']:.3f}")
    return report


def run_tightness(dataset_name, steps=50, grid_size=500, seed=0, pool_size=None, verbose=None):
    """
    Compare the true change in expected risk with its deterministic bound along an AL run.

    A generated dataset is standardized and split into a pool and an evaluation grid of
    grid_size rows standing in for the data distribution. The loss range covers every
    per-point expected loss realized on the grid, so C is the constant for that range.

    Returns:
        list: One dict per step with step, risk_before, risk_after, gap, kl, c and r.
    """
    verbose = config.VERBOSE if verbose is None else verbose
    pool_size = max(config.POOL_SIZE, int(steps)) if pool_size is None else int(pool_size)
    if steps > pool_size:
        raise ValueError(f"steps ({steps}) cannot exceed pool_size ({pool_size})")

    full = dataset.standardize(dataset.generate_named(dataset_name, n=int(grid_size) + pool_size, seed=seed))
    pool, grid = dataset.split_pool(full, pool_size, seed)
    params = fit_hyperparameters(full, config.H_GRID, config.BETA_GRID, config.HYPERPARAMETER_TRAIN_SIZE, seed)
    trace = alloop.run_active_learning(pool, grid, params, [], bounds.LossRange(0.0, 0.0),
                                       max_steps=int(steps), seed=seed)

    posts = [gp.prior_posterior(params, pool.dim)]
    for index in trace.chosen_indices:
        posts.append(gp.update_posterior(posts[-1], pool.inputs[index], pool.targets[index]))
    losses = [bounds.expected_loss_per_point(post, grid) for post in posts]
    low = min(float(values.min()) for values in losses)
    high = max(float(values.max()) for values in losses)
    c_constant = bounds.jensen_gap_constant(bounds.LossRange(0.0, high - low))

    risks = [float(np.mean(values)) for values in losses]
    rows = []
    for step, kl in enumerate(trace.bound_trace.kl_values, start=1):
        rows.append({
            "step": step,
            "risk_before": risks[step - 1],
            "risk_after": risks[step],
            "gap": risks[step - 1] - risks[step],
            "kl": kl,
            "c": c_constant,
            "r": kl + c_constant,
        })
    if verbose:
        violations = sum(1 for row in rows if row["gap"] > row["r"])
        print(f"[+] Tightness on {dataset_name}: {len(rows)} steps, C = {c_constant:.4g}, {violations} violations")
    return rows
