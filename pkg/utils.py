import os
import json
import math

import numpy as np
import pandas as pd


class AlstopError(Exception):
    """Base class for errors raised by the stopping-criterion toolkit."""


class ConfigError(AlstopError, ValueError):
    """Invalid or inconsistent configuration."""


class DataError(AlstopError, ValueError):
    """Unreadable, malformed or insufficient data."""


class NumericalError(AlstopError, ArithmeticError):
    """A factorization or other numerical routine failed."""


EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_DATA_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def exit_code_for(error):
    """
    Map an exception to the CLI exit code.

    Args:
        error (BaseException): The exception that ended the command.

    Returns:
        int: 1 for configuration errors, 2 for data errors, 3 for numerical failures.
    """
    if isinstance(error, DataError):
        return EXIT_DATA_ERROR
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL_ERROR
    return EXIT_CONFIG_ERROR


def make_rng(seed):
    """
    Create the documented 64-bit generator (numpy PCG64) for a seed.

    Passing an existing Generator returns it unchanged so helpers can share state.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed, count):
    """Derive `count` independent integer seeds from a root seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def mean_and_stderr(values):
    """
    Mean and standard error (sample sd / sqrt(n)) of a list of numbers.

    Returns (nan, nan) for an empty list and a standard error of 0 for a single value.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def format_significant(value, digits=6):
    """Format a number with a fixed count of significant digits for CSV output; strings pass through."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.{digits}g}"


def write_csv(path, rows, columns, digits=6):
    """
    Write a list of dict rows to CSV with the given column order.

    Floats are rounded to `digits` significant digits; reproducibility comes from seeds,
    not from output precision.
    """
    ensure_directory(os.path.dirname(path))
    frame = pd.DataFrame(
        [[format_significant(row.get(column), digits) for column in columns] for row in rows],
        columns=columns,
    )
    frame.to_csv(path, index=False)
    return path


def write_json(path, payload):
    """Write a JSON document, converting numpy scalars and arrays on the way."""
    ensure_directory(os.path.dirname(path))
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=_json_default)
    return path


def read_json(path):
    """Read a JSON document, raising ConfigError when it cannot be parsed."""
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file {path} was not found.") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e


def ensure_directory(directory):
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
