import argparse
import json
import os
import sys
import traceback

import numpy as np

import dataset
import harness
import runstest
from config_loader import config
from utils import (AlstopError, ConfigError, DataError, EXIT_CONFIG_ERROR, EXIT_OK, exit_code_for,
                   read_json, write_csv)


class AlstopArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with the config-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


def load_experiment_config(path=None, overrides=None):
    """ExperimentConfig from an optional JSON file plus command-line overrides."""
    payload = read_json(path) if path else {}
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    payload.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return harness.ExperimentConfig.from_dict(payload)


def read_values(path=None):
    """
    Newline-delimited real numbers from a file, or from stdin when path is None or "-".

    Raises:
        DataError: On a missing file or a line that is not a number.
    """
    if path and path != "-":
        if not os.path.exists(path):
            raise DataError(f"The input file {path} was not found.")
        with open(path, "r") as f:
            lines = f.read().splitlines()
    else:
        lines = sys.stdin.read().splitlines()

    values = []
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as e:
            raise DataError(f"Line {number} is not a number: {line!r}") from e
    if not values:
        raise DataError("No values to test.")
    return values


def command_run(args):
    cfg = load_experiment_config(args.config, {"output_dir": args.output_dir})
    harness.run_experiment(cfg, verbose=args.verbose)


def command_calibrate_eta(args):
    cfg = load_experiment_config(args.config, {"seed": args.seed})
    ds = dataset.load_dataset_source(cfg.dataset, seed=cfg.seed)
    params = harness.fit_hyperparameters(ds, cfg.h_grid, cfg.beta_grid, cfg.hyperparameter_train_size, cfg.seed)
    eta = harness.calibrate_eta(
        ds,
        args.train_size or cfg.eta_train_size,
        args.repeats or cfg.eta_repeats,
        params,
        cfg.seed,
    )
    print(json.dumps({"eta": eta, "h": params.h, "beta": params.beta}))


def command_calibrate_threshold(args):
    cfg = load_experiment_config(args.config, {"seed": args.seed})
    value_range = (args.low, args.high) if args.low is not None and args.high is not None else None
    threshold = harness.calibrate_threshold(
        cfg, args.criterion, value_range=value_range, grid_count=args.grid_count,
        replications=args.replications, verbose=args.verbose,
    )
    print(json.dumps({"criterion": args.criterion, "threshold": threshold}))


def command_runstest(args):
    values = read_values(args.input)
    report = runstest.analyze_sequence(values, args.alpha, args.mode, args.sided, config.EXACT_MAX_LENGTH)
    payload = runstest.report_to_dict(report)
    bits = runstest.binarize_by_median(values)
    payload.update({"t0": bits.t0, "t1": bits.t1, "bits": "".join(str(b) for b in bits.bits)})
    print(json.dumps(payload))


def command_generate(args):
    ds = dataset.generate_named(args.name, n=args.n, seed=args.seed, noise_precision=args.noise_precision)
    rows = [dict(zip(ds.feature_names + ("y",), (*x, y))) for x, y in zip(ds.inputs, ds.targets)]
    write_csv(args.output, rows, list(ds.feature_names) + ["y"], digits=17)
    if args.verbose:
        print(f"[+] Wrote {len(ds)} rows to {args.output}")


def command_tightness(args):
    rows = harness.run_tightness(args.dataset, steps=args.steps, grid_size=args.grid_size, seed=args.seed,
                                 verbose=args.verbose)
    output = args.output or os.path.join(config.OUTPUT_DIR, f"tightness_{args.dataset}.csv")
    write_csv(output, rows, list(rows[0].keys()), config.CSV_SIGNIFICANT_DIGITS)
    if args.verbose:
        gaps = np.array([row["gap"] for row in rows])
        r_values = np.array([row["r"] for row in rows])
        print(f"[+] Largest gap {gaps.max():.4g}, smallest bound {r_values.min():.4g}; wrote {output}")


def build_parser():
    parser = AlstopArgumentParser(prog="alstop", description="Stopping criteria for active learning with GP regression")
    parser.add_argument("--quiet", dest="verbose", action="store_false", default=config.VERBOSE,
                        help="Suppress progress output")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a replicated experiment")
    run.add_argument("--config", help="Experiment JSON file")
    run.add_argument("--output-dir", help="Directory for report.json, summary.csv and trace files")
    run.set_defaults(handler=command_run)

    eta = subparsers.add_parser("calibrate-eta", help="Calibrate the test-risk level that defines t_opt")
    eta.add_argument("--config", help="Experiment JSON file")
    eta.add_argument("--train-size", type=int)
    eta.add_argument("--repeats", type=int)
    eta.add_argument("--seed", type=int)
    eta.set_defaults(handler=command_calibrate_eta)

    threshold = subparsers.add_parser("calibrate-threshold", help="Calibrate a baseline criterion threshold")
    threshold.add_argument("--criterion", required=True, choices=harness.SCANNED_KINDS)
    threshold.add_argument("--config", help="Experiment JSON file")
    threshold.add_argument("--low", type=float)
    threshold.add_argument("--high", type=float)
    threshold.add_argument("--grid-count", type=int)
    threshold.add_argument("--replications", type=int)
    threshold.add_argument("--seed", type=int)
    threshold.set_defaults(handler=command_calibrate_threshold)

    runs = subparsers.add_parser("runstest", help="Runs test on newline-delimited numbers")
    runs.add_argument("input", nargs="?", default="-", help="Input file, stdin when omitted")
    runs.add_argument("--alpha", type=float, default=config.ALPHA)
    runs.add_argument("--mode", choices=runstest.MODES, default=config.RUNS_TEST_MODE)
    runs.add_argument("--sided", choices=runstest.SIDES, default=config.RUNS_TEST_SIDED)
    runs.set_defaults(handler=command_runstest)

    generate = subparsers.add_parser("generate", help="Write a generated dataset as CSV")
    generate.add_argument("--name", required=True, choices=dataset.GENERATORS)
    generate.add_argument("--n", type=int)
    generate.add_argument("--seed", type=int, default=config.SEED)
    generate.add_argument("--noise-precision", type=float)
    generate.add_argument("--output", required=True)
    generate.set_defaults(handler=command_generate)

    tightness = subparsers.add_parser("tightness", help="Compare the bound with the true risk change")
    tightness.add_argument("--dataset", choices=dataset.GENERATORS, default="artificial")
    tightness.add_argument("--steps", type=int, default=50)
    tightness.add_argument("--grid-size", type=int, default=500)
    tightness.add_argument("--seed", type=int, default=config.SEED)
    tightness.add_argument("--output")
    tightness.set_defaults(handler=command_tightness)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except (AlstopError, ValueError) as e:
        if args.verbose:
            traceback.print_exc()
        else:
            print(f"[-] {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        if args.verbose:
            traceback.print_exc()
        else:
            print(f"[-] alstop failed: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
