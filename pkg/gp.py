"""
Exact Gaussian-process regression with a Gaussian kernel and zero prior mean.

The posterior keeps the lower Cholesky factor of K + beta^-1 I so that adding one
labeled point is a rank-one extension instead of a refit.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

from config_loader import config
from utils import NumericalError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KernelParams:
    """Length scale h of k(x, x') = exp(-|x - x'|^2 / (2 h^2)) and noise precision beta."""
    h: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"length scale h must be positive, got {self.h}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"noise precision beta must be positive, got {self.beta}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def noise_variance(self):
        return 1.0 / self.beta


@dataclass(frozen=True)
class GPPosterior:
    """
    GP posterior given t training pairs.

    Attributes:
        params (KernelParams): Kernel and noise hyperparameters.
        train_inputs (np.ndarray): Shape (t, d).
        train_targets (np.ndarray): Shape (t,).
        gram_factor (np.ndarray): Lower-triangular L with L L^T = K + beta^-1 I (+ jitter I).
        alpha (np.ndarray): (K + beta^-1 I)^-1 y.
        jitter (float): Extra diagonal term that was needed to factorize, 0 when none.
    """
    params: KernelParams
    train_inputs: np.ndarray
    train_targets: np.ndarray
    gram_factor: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def size(self):
        return self.train_targets.shape[0]

    @property
    def dim(self):
        return self.train_inputs.shape[1]


def kernel_matrix(xa, xb, h):
    """Gaussian kernel block between the rows of xa and xb."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    return np.exp(-cdist(xa, xb, "sqeuclidean") / (2.0 * h * h))


def cholesky_with_jitter(matrix, jitter_start=None, jitter_max=None):
    """
    Lower Cholesky factor of a symmetric matrix, adding diagonal jitter only on failure.

    The jitter starts at jitter_start * mean(diag) and grows tenfold per failed attempt
    until it passes jitter_max * mean(diag).

    Returns:
        tuple: (L, jitter) where jitter is the absolute amount added to the diagonal.

    Raises:
        NumericalError: If the matrix cannot be factorized even with the largest jitter.
    """
    jitter_start = config.JITTER_START if jitter_start is None else jitter_start
    jitter_max = config.JITTER_MAX if jitter_max is None else jitter_max
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return np.zeros((0, 0)), 0.0
    if not np.all(np.isfinite(matrix)):
        raise NumericalError("cannot factorize a matrix with non-finite entries")

    try:
        return sla.cholesky(matrix, lower=True), 0.0
    except sla.LinAlgError:
        pass

    scale = float(np.mean(np.abs(np.diag(matrix)))) or 1.0
    relative = jitter_start
    while relative <= jitter_max * (1.0 + 1e-9):
        jitter = relative * scale
        try:
            factor = sla.cholesky(matrix + jitter * np.eye(matrix.shape[0]), lower=True)
            return factor, jitter
        except sla.LinAlgError:
            relative *= 10.0
    raise NumericalError(
        f"Cholesky factorization failed for a {matrix.shape[0]}x{matrix.shape[0]} matrix "
        f"even with jitter {jitter_max:g} x mean(diag)"
    )


def prior_posterior(params, dim):
    """The GP prior written as a posterior with zero training points."""
    return GPPosterior(
        params=params,
        train_inputs=np.zeros((0, int(dim))),
        train_targets=np.zeros(0),
        gram_factor=np.zeros((0, 0)),
        alpha=np.zeros(0),
    )


def _fit_arrays(inputs, targets, params):
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if inputs.shape[0] == 0:
        return prior_posterior(params, inputs.shape[1])
    gram = kernel_matrix(inputs, inputs, params.h)
    gram[np.diag_indices_from(gram)] += params.noise_variance
    factor, jitter = cholesky_with_jitter(gram)
    alpha = sla.cho_solve((factor, True), targets)
    return GPPosterior(params, inputs, targets, factor, alpha, jitter)


def fit_posterior(train, params):
    """
    Exact GP posterior for a training dataset.

    Args:
        train (LabeledDataset): Non-empty training data.
        params (KernelParams): Hyperparameters.

    Returns:
        GPPosterior: Posterior with mean k(x)^T (K + beta^-1 I)^-1 y.
    """
    if len(train) < 1:
        raise ValueError("fit_posterior needs at least one training row")
    return _fit_arrays(train.inputs, train.targets, params)


def predict(post, queries, joint=False):
    """
    Predictive mean and (co)variance of f at the query inputs.

    Args:
        post (GPPosterior): Posterior to predict from.
        queries (array-like): Shape (m, d) query inputs.
        joint (bool): Return the full m x m covariance instead of the m variances.

    Returns:
        tuple: (mean, variances) or (mean, covariance). Negative variances from
        round-off are clamped to zero.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[0] == 0:
        raise ValueError("predict needs at least one query point")
    h = post.params.h

    if post.size == 0:
        mean = np.zeros(queries.shape[0])
        if joint:
            return mean, kernel_matrix(queries, queries, h)
        return mean, np.ones(queries.shape[0])

    cross = kernel_matrix(post.train_inputs, queries, h)
    mean = cross.T @ post.alpha
    v = sla.solve_triangular(post.gram_factor, cross, lower=True)

    if joint:
        cov = kernel_matrix(queries, queries, h) - v.T @ v
        cov = 0.5 * (cov + cov.T)
        diag = np.diag_indices_from(cov)
        cov[diag] = np.maximum(cov[diag], 0.0)
        return mean, cov

    # k(x, x) = 1 for the Gaussian kernel
    variances = np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 0.0)
    return mean, variances


def update_posterior(post, x_new, y_new):
    """
    Add one labeled point by extending the Cholesky factor with a new row.

    Equivalent to refitting on the augmented training set; falls back to a full
    refit when the new pivot is not positive.
    """
    x_new = np.asarray(x_new, dtype=float).reshape(1, -1)
    inputs = np.vstack([post.train_inputs, x_new]) if post.size else x_new
    targets = np.append(post.train_targets, float(y_new))
    if post.size == 0:
        return _fit_arrays(inputs, targets, post.params)

    cross = kernel_matrix(post.train_inputs, x_new, post.params.h)[:, 0]
    row = sla.solve_triangular(post.gram_factor, cross, lower=True)
    pivot = 1.0 + post.params.noise_variance + post.jitter - row @ row
    if not np.isfinite(pivot) or pivot <= 0.0:
        return _fit_arrays(inputs, targets, post.params)

    t = post.size
    factor = np.zeros((t + 1, t + 1))
    factor[:t, :t] = post.gram_factor
    factor[t, :t] = row
    factor[t, t] = np.sqrt(pivot)
    alpha = sla.cho_solve((factor, True), targets)
    return GPPosterior(post.params, inputs, targets, factor, alpha, post.jitter)


def log_marginal_likelihood(train, params):
    """log N(y | 0, K + beta^-1 I) of the training targets."""
    if len(train) < 1:
        raise ValueError("log_marginal_likelihood needs at least one training row")
    post = _fit_arrays(train.inputs, train.targets, params)
    return _log_marginal_from_posterior(post)


def _log_marginal_from_posterior(post):
    return _log_marginal(post.train_targets, post.gram_factor, post.alpha)


def _log_marginal(targets, factor, alpha):
    """Gaussian log density of the targets from the lower Cholesky factor of the Gram matrix."""
    return float(-0.5 * targets @ alpha - np.sum(np.log(np.diag(factor))) - 0.5 * len(targets) * LOG_2PI)


def log_grid(low, high, count):
    """Log-spaced grid of `count` values from low to high."""
    if not (0 < low <= high) or int(count) < 1:
        raise ValueError(f"invalid grid ({low}, {high}, {count})")
    return list(np.geomspace(low, high, int(count)))


def optimize_hyperparameters(train, h_grid, beta_grid):
    """
    Pick the (h, beta) grid pair with the highest log marginal likelihood.

    Ties go to the smallest h, then the smallest beta. Grid points whose Gram matrix
    cannot be factorized are skipped.

    Raises:
        ValueError: If a grid is empty or has non-positive entries.
        NumericalError: If no grid point can be factorized.
    """
    h_values = sorted(float(h) for h in h_grid)
    beta_values = sorted(float(b) for b in beta_grid)
    if not h_values or not beta_values:
        raise ValueError("hyperparameter grids must be non-empty")
    if min(h_values) <= 0 or min(beta_values) <= 0:
        raise ValueError("hyperparameter grids must be strictly positive")
    if len(train) < 1:
        raise ValueError("optimize_hyperparameters needs at least one training row")

    sq_dist = cdist(train.inputs, train.inputs, "sqeuclidean")
    targets = train.targets
    t = len(train)
    best, best_value = None, -np.inf

    for h in h_values:
        kernel = np.exp(-sq_dist / (2.0 * h * h))
        for beta in beta_values:
            gram = kernel + np.eye(t) / beta
            try:
                factor, _ = cholesky_with_jitter(gram)
            except NumericalError:
                continue
            value = _log_marginal(targets, factor, sla.cho_solve((factor, True), targets))
            if value > best_value:
                best, best_value = KernelParams(h, beta), value

    if best is None:
        raise NumericalError("no hyperparameter grid point could be factorized")
    return best
