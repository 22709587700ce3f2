"""
Data generation, ingestion, standardization and pool/test splitting.

Datasets are immutable: every operation returns a new LabeledDataset whose arrays
are flagged read-only, so replications can share them freely.
"""
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from utils import DataError, make_rng

# Columns whose population sd falls below this (relative to their mean) count as constant.
_CONSTANT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LabeledDataset:
    """
    Rows of (input vector, scalar target) plus the metadata needed to undo standardization.

    Attributes:
        inputs (np.ndarray): Shape (n, d).
        targets (np.ndarray): Shape (n,).
        feature_means (np.ndarray): Shape (d,), column means before standardization.
        feature_sds (np.ndarray): Shape (d,), population sds before standardization (0 for constant columns).
        standardized (bool): Whether inputs and targets have been standardized.
        target_mean (float): Target mean before standardization.
        target_sd (float): Target population sd before standardization.
        feature_names (tuple): Column names of the inputs, if known.
        target_name (str): Name of the target column.
    """
    inputs: np.ndarray
    targets: np.ndarray
    feature_means: np.ndarray = None
    feature_sds: np.ndarray = None
    standardized: bool = False
    target_mean: float = 0.0
    target_sd: float = 1.0
    feature_names: tuple = field(default=())
    target_name: str = "y"

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        targets = np.array(self.targets, dtype=float).reshape(-1)
        if inputs.ndim != 2:
            raise ValueError(f"inputs must be a 2-D array, got shape {inputs.shape}")
        if inputs.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError(f"inputs have {inputs.shape[0]} rows but targets have {targets.shape[0]}")

        dim = inputs.shape[1]
        means = np.zeros(dim) if self.feature_means is None else np.array(self.feature_means, dtype=float)
        sds = np.ones(dim) if self.feature_sds is None else np.array(self.feature_sds, dtype=float)
        names = tuple(self.feature_names) if self.feature_names else tuple(f"x{i + 1}" for i in range(dim))

        for array in (inputs, targets, means, sds):
            array.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_means", means)
        object.__setattr__(self, "feature_sds", sds)
        object.__setattr__(self, "feature_names", names)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def subset(self, indices):
        """Rows at `indices` (in that order), keeping the standardization metadata."""
        indices = np.asarray(indices, dtype=int)
        return LabeledDataset(
            inputs=self.inputs[indices],
            targets=self.targets[indices],
            feature_means=self.feature_means,
            feature_sds=self.feature_sds,
            standardized=self.standardized,
            target_mean=self.target_mean,
            target_sd=self.target_sd,
            feature_names=self.feature_names,
            target_name=self.target_name,
        )

    def destandardize_inputs(self):
        if not self.standardized:
            return np.array(self.inputs)
        return self.inputs * self.feature_sds + self.feature_means

    def destandardize_targets(self):
        if not self.standardized:
            return np.array(self.targets)
        return self.targets * self.target_sd + self.target_mean


def load_table(path, target_column):
    """
    Load a comma-delimited numeric table with one header row.

    Args:
        path (str): Path to the CSV file.
        target_column (int or str): Column index or header name holding the targets.

    Returns:
        LabeledDataset: Unstandardized dataset with the remaining columns as features.

    Raises:
        DataError: If the file is missing, a cell is not numeric, the target column
            does not exist, or the table has fewer than 2 rows.
    """
    if not os.path.exists(path):
        raise DataError(f"The data file {path} was not found.")
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Could not parse {path}: {e}") from e

    columns = [str(column).strip() for column in frame.columns]
    frame.columns = columns
    if len(frame) < 2:
        raise DataError(f"{path} has {len(frame)} data rows; at least 2 are required.")

    if isinstance(target_column, (int, np.integer)) and not isinstance(target_column, bool):
        if not 0 <= target_column < len(columns):
            raise DataError(f"Target column index {target_column} is out of range for {len(columns)} columns.")
        target_name = columns[target_column]
    else:
        target_name = str(target_column).strip()
        if target_name not in columns:
            raise DataError(f"Target column '{target_name}' is not in the header {columns}.")
    if len(columns) < 2:
        raise DataError(f"{path} needs at least one feature column besides the target.")

    numeric = {column: _parse_column(frame[column], column, path) for column in columns}

    feature_names = tuple(column for column in columns if column != target_name)
    inputs = np.column_stack([numeric[column] for column in feature_names])
    return LabeledDataset(
        inputs=inputs,
        targets=numeric[target_name],
        feature_names=feature_names,
        target_name=target_name,
    )


def _parse_column(cells, column, path):
    """
    Parse one column of string cells to floats.

    Python's float parser is correctly rounded, so values written with 17 significant
    digits come back bit for bit. NaN and infinite entries count as non-numeric.
    """
    stripped = cells.str.strip()
    try:
        values = stripped.astype(float).to_numpy()
        bad = ~np.isfinite(values)
    except ValueError as e:
        values, cause = None, e
        bad = pd.to_numeric(stripped, errors="coerce").isna().to_numpy()
    else:
        cause = None
    if bad.any() or values is None:
        row = int(np.flatnonzero(bad)[0]) if bad.any() else 0
        raise DataError(
            f"Non-numeric value {cells.iloc[row]!r} at data row {row + 1} "
            f"(line {row + 2}), column '{column}' in {path}."
        ) from cause
    return values


def _column_moments(values):
    means = values.mean(axis=0)
    sds = values.std(axis=0)  # population sd
    constant = sds <= _CONSTANT_TOLERANCE * np.maximum(1.0, np.abs(means))
    sds = np.where(constant, 0.0, sds)
    return means, sds, constant


def standardize(ds):
    """
    Shift and scale every feature column, and the targets, to mean 0 and population sd 1.

    Constant columns become all zeros. The original means and sds are kept so the
    transformation can be undone.
    """
    if ds.standardized:
        raise ValueError("dataset is already standardized")

    means, sds, constant = _column_moments(ds.inputs)
    scale = np.where(constant, 1.0, sds)
    inputs = np.where(constant, 0.0, (ds.inputs - means) / scale)

    target_means, target_sds, target_constant = _column_moments(ds.targets.reshape(-1, 1))
    target_mean, target_sd = float(target_means[0]), float(target_sds[0])
    if target_constant[0]:
        targets = np.zeros_like(ds.targets)
    else:
        targets = (ds.targets - target_mean) / target_sd

    return LabeledDataset(
        inputs=inputs,
        targets=targets,
        feature_means=means,
        feature_sds=sds,
        standardized=True,
        target_mean=target_mean,
        target_sd=target_sd,
        feature_names=ds.feature_names,
        target_name=ds.target_name,
    )


def artificial_function(x):
    """Noiseless regression function of the one-dimensional artificial benchmark."""
    x = np.asarray(x, dtype=float)
    return np.exp(-(x - 2.0) ** 2 / 2.0) + np.exp(-(x - 6.0) ** 2 / 10.0) + 1.0 / (x ** 2 + 1.0)


def sign_wave_function(x):
    """sign(sin(2 pi x)) with sign(0) taken as +1."""
    x = np.asarray(x, dtype=float)
    return np.where(np.sin(2.0 * np.pi * x) >= 0.0, 1.0, -1.0)


def generate_artificial(n, noise_precision, x_range=(-5.0, 15.0), seed=0):
    """
    Sample the artificial benchmark: x uniform on x_range, y = f(x) + N(0, 1/beta) noise.

    Args:
        n (int): Number of pairs.
        noise_precision (float): beta, the inverse noise variance.
        x_range (tuple): Interval the inputs are drawn from.
        seed (int): Seed for the PCG64 generator.

    Returns:
        LabeledDataset: One-dimensional, unstandardized dataset.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not noise_precision > 0:
        raise ValueError(f"noise_precision must be positive, got {noise_precision}")
    low, high = float(x_range[0]), float(x_range[1])
    if not high > low:
        raise ValueError(f"x_range must be an increasing interval, got {x_range}")

    rng = make_rng(seed)
    x = rng.uniform(low, high, int(n))
    noise = rng.normal(0.0, 1.0 / np.sqrt(noise_precision), int(n))
    return LabeledDataset(inputs=x.reshape(-1, 1), targets=artificial_function(x) + noise)


def generate_sign_wave(n, seed=0):
    """Sample x uniform on [0, 1] with labels sign(sin(2 pi x)) in {-1, +1}."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    rng = make_rng(seed)
    x = rng.uniform(0.0, 1.0, int(n))
    return LabeledDataset(inputs=x.reshape(-1, 1), targets=sign_wave_function(x))


def split_pool(ds, pool_size, seed=0):
    """
    Uniformly partition a dataset into a labeling pool and a held-out test set.

    Returns:
        tuple: (pool, test) with len(pool) == pool_size.
    """
    if int(pool_size) != pool_size or not 1 <= pool_size < len(ds):
        raise ValueError(f"pool_size must be in [1, {len(ds) - 1}], got {pool_size}")
    order = make_rng(seed).permutation(len(ds))
    return ds.subset(order[:int(pool_size)]), ds.subset(order[int(pool_size):])


GENERATORS = ("artificial", "signwave")


def generate_named(name, n=None, seed=0, noise_precision=None, x_range=None):
    """Dispatch to a generator by name, filling unspecified parameters from the config."""
    from config_loader import config

    if name == "artificial":
        return generate_artificial(
            n if n is not None else config.ARTIFICIAL_N,
            noise_precision if noise_precision is not None else config.ARTIFICIAL_NOISE_PRECISION,
            tuple(x_range if x_range is not None else config.ARTIFICIAL_X_RANGE),
            seed,
        )
    if name == "signwave":
        return generate_sign_wave(n if n is not None else config.SIGNWAVE_N, seed)
    raise ValueError(f"Unknown generator '{name}', expected one of {GENERATORS}")


def load_dataset_source(source, seed=0):
    """
    Build a standardized dataset from a config source entry.

    Args:
        source (dict): Either {"generator": name, ...generator params} or
            {"path": csv path, "target_column": index or name}.
        seed (int): Seed for generated sources; ignored for files.

    Returns:
        LabeledDataset: Standardized dataset.
    """
    if "generator" in source:
        params = {key: value for key, value in source.items() if key != "generator"}
        unknown = set(params) - {"n", "noise_precision", "x_range"}
        if unknown:
            raise ValueError(f"Unknown generator parameters {sorted(unknown)}")
        ds = generate_named(source["generator"], seed=seed, **params)
    elif "path" in source:
        target_column = source.get("target_column")
        if target_column is None:
            target_column = _last_column_index(source["path"])
        ds = load_table(source["path"], target_column)
    else:
        raise ValueError("A dataset source needs either 'generator' or 'path'")
    return standardize(ds)


def _last_column_index(path):
    """Index of the last column of a CSV header, the default target column."""
    if not os.path.exists(path):
        raise DataError(f"The data file {path} was not found.")
    header = pd.read_csv(path, nrows=0)
    return len(header.columns) - 1
