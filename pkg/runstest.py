"""
Wald-Wolfowitz runs test on median-binarized sequences.

A sequence of bound values is turned into bits (1 when >= the median of the whole
sequence) and the number of runs U is compared with its distribution under
exchangeability. Too few runs means a trend; a non-rejection is read as convergence.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

MODES = ("exact", "normal", "auto")
SIDES = ("two", "lower")


@dataclass(frozen=True)
class BinarySequence:
    bits: tuple
    t0: int = 0
    t1: int = 0

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("a binary sequence may only contain 0 and 1")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "t1", sum(bits))
        object.__setattr__(self, "t0", len(bits) - sum(bits))

    def __len__(self):
        return len(self.bits)

    def flipped(self):
        return BinarySequence(tuple(1 - b for b in self.bits))


@dataclass(frozen=True)
class RunsTestReport:
    """
    Outcome of one runs test.

    mu and sigma2 are the moments of U under the null; z is (u - mu) / sqrt(sigma2).
    A degenerate report (only one symbol present) always rejects randomness.
    """
    u: int
    mu: float
    sigma2: float
    z: float
    p_value: float
    reject_randomness: bool
    mode: str
    sided: str
    length: int
    degenerate: bool = False


def binarize_by_median(r_values):
    """
    Map each value to 1 if it is >= the median of all values, else 0.

    The median is the usual order statistic (mean of the middle two for even lengths).
    """
    values = np.asarray(r_values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("cannot binarize an empty sequence")
    median = np.median(values)
    return BinarySequence(tuple(int(v) for v in (values >= median)))


def count_runs(e):
    """Number of maximal blocks of identical symbols."""
    bits = e.bits if isinstance(e, BinarySequence) else tuple(e)
    if not bits:
        raise ValueError("cannot count runs of an empty sequence")
    return 1 + sum(1 for prev, cur in zip(bits, bits[1:]) if prev != cur)


@lru_cache(maxsize=4096)
def exact_runs_distribution(t0, t1):
    """
    Exact null distribution of the run count for t0 zeros and t1 ones.

    Returns:
        dict: {u: Fraction} for u = 2 .. t0 + t1 (zero-probability values included).
    """
    t0, t1 = int(t0), int(t1)
    if t0 < 1 or t1 < 1:
        raise ValueError(f"both symbol counts must be at least 1, got t0={t0}, t1={t1}")
    total = t0 + t1
    arrangements = math.comb(total, t0)
    table = {}
    for u in range(2, total + 1):
        k = u // 2
        if u % 2 == 0:
            ways = 2 * math.comb(t0 - 1, k - 1) * math.comb(t1 - 1, k - 1)
        else:
            ways = (math.comb(t0 - 1, k) * math.comb(t1 - 1, k - 1)
                    + math.comb(t0 - 1, k - 1) * math.comb(t1 - 1, k))
        table[u] = Fraction(ways, arrangements)
    return table


def runs_moments(t0, t1):
    """
    Mean and variance of U under the null:
    mu = 1 + 2 t0 t1 / T and sigma^2 = 2 t0 t1 (2 t0 t1 - T) / (T^2 (T - 1)).
    """
    if t0 < 1 or t1 < 1:
        raise ValueError(f"both symbol counts must be at least 1, got t0={t0}, t1={t1}")
    total = t0 + t1
    if total < 3:
        raise ValueError(f"the variance of U needs T >= 3, got T={total}")
    return _moments(t0, t1)


def _moments(t0, t1):
    total = t0 + t1
    product = 2.0 * t0 * t1
    mu = 1.0 + product / total
    sigma2 = product * (product - total) / (total * total * (total - 1)) if total > 1 else 0.0
    return mu, sigma2


def resolve_mode(mode, length, exact_max_length=30):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "auto":
        return "exact" if length <= exact_max_length else "normal"
    return mode


def _p_value(u, t0, t1, mode, sided):
    mu, sigma2 = _moments(t0, t1)
    z = (u - mu) / math.sqrt(sigma2) if sigma2 > 0 else float("nan")
    if mode == "normal":
        if math.isnan(z):
            return z, 1.0
        p = ndtr(z) if sided == "lower" else 2.0 * ndtr(-abs(z))
        return z, float(min(max(p, 0.0), 1.0))

    table = exact_runs_distribution(t0, t1)
    lower = sum((p for v, p in table.items() if v <= u), Fraction(0))
    if sided == "lower":
        return z, float(lower)
    upper = sum((p for v, p in table.items() if v >= u), Fraction(0))
    return z, float(min(Fraction(1), 2 * min(lower, upper)))


def runs_test(e, alpha, mode="normal", sided="two", exact_max_length=30):
    """
    Test a binary sequence for randomness.

    Args:
        e (BinarySequence): Sequence to test.
        alpha (float): Significance level in (0, 0.5).
        mode (str): "exact", "normal" or "auto" (exact up to exact_max_length).
        sided (str): "two" for a two-sided test, "lower" to only flag too few runs.
        exact_max_length (int): Length limit for the exact mode under "auto".

    Returns:
        RunsTestReport: reject_randomness is p_value < alpha. Sequences with a single
        symbol are reported as degenerate and always reject.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must be in (0, 0.5), got {alpha}")
    if sided not in SIDES:
        raise ValueError(f"sided must be one of {SIDES}, got {sided!r}")
    mode = resolve_mode(mode, len(e), exact_max_length)
    u = count_runs(e)

    if e.t0 == 0 or e.t1 == 0:
        nan = float("nan")
        return RunsTestReport(u, nan, nan, nan, 0.0, True, mode, sided, len(e), degenerate=True)

    mu, sigma2 = _moments(e.t0, e.t1)
    z, p_value = _p_value(u, e.t0, e.t1, mode, sided)
    return RunsTestReport(u, mu, sigma2, z, p_value, p_value < alpha, mode, sided, len(e))


def max_runs(t0, t1):
    return 2 * min(t0, t1) + (1 if t0 != t1 else 0)


def can_reject(t0, t1, alpha, mode="normal", sided="two", exact_max_length=30):
    """
    Whether any attainable run count would be rejected at level alpha.

    When even the most extreme arrangement is accepted, an acceptance says nothing
    about the sequence.
    """
    if t0 < 1 or t1 < 1:
        return False
    mode = resolve_mode(mode, t0 + t1, exact_max_length)
    candidates = (2,) if sided == "lower" else (2, max_runs(t0, t1))
    return any(_p_value(u, t0, t1, mode, sided)[1] < alpha for u in candidates)


def analyze_sequence(values, alpha, mode="auto", sided="two", exact_max_length=30):
    """Binarize real values by their median and run the runs test on the bits."""
    return runs_test(binarize_by_median(values), alpha, mode, sided, exact_max_length)


def report_to_dict(report):
    def clean(value):
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    return {key: clean(value) for key, value in report.__dict__.items()}
