"""
Generalization-gap quantities.

The gap between the expected generalization errors of two GP posteriors that share a
prior is bounded deterministically by their KL divergence plus a Jensen-gap constant C
that only depends on the loss range [a, b]. For one added point the KL has a closed form
in the current predictive mean and variance at that point.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

import gp
from utils import NumericalError


@dataclass(frozen=True)
class LossRange:
    """Loss values are assumed to lie in [a, b] with 0 <= a <= b < inf."""
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"loss range must be finite, got [{a}, {b}]")
        if not 0.0 <= a <= b:
            raise ValueError(f"loss range must satisfy 0 <= a <= b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def width(self):
        return self.b - self.a

    @classmethod
    def from_targets(cls, targets):
        """a = 0 and b = max(Y) - min(Y), the calibration used for every criterion."""
        targets = np.asarray(targets, dtype=float)
        return cls(0.0, float(targets.max() - targets.min()))


@dataclass(frozen=True)
class GapBound:
    """r = kl + c, the upper bound on the drop in expected generalization error."""
    kl: float
    c: float
    r: float = field(init=False)

    def __post_init__(self):
        if self.kl < 0 or self.c < 0:
            raise ValueError(f"KL and C must be non-negative, got kl={self.kl}, c={self.c}")
        object.__setattr__(self, "r", self.kl + self.c)


def jensen_gap_constant(loss_range):
    """
    C = 2 log((e^a + e^b) / 2) - a - b, evaluated without overflow.
    """
    a, b = loss_range.a, loss_range.b
    if a == b:
        return 0.0
    value = 2.0 * (np.logaddexp(a, b) - math.log(2.0)) - a - b
    return max(float(value), 0.0)


def sequential_kl_from_moments(sigma, residual, beta):
    """
    KL(q_t || q_t+1) after observing one point, from the current predictive variance
    sigma at that point, the residual y - mu, and the noise precision beta.
    """
    sigma = max(float(sigma), 0.0)
    beta_sigma = beta * sigma
    value = (
        0.5 * beta_sigma
        - 0.5 * math.log1p(beta_sigma)
        + 0.5 * beta_sigma / (sigma + 1.0 / beta) * residual * residual
    )
    return max(value, 0.0)


def sequential_kl(post_t, x_new, y_new):
    """
    Closed-form KL divergence between the GP posteriors before and after adding (x_new, y_new).

    Args:
        post_t (GPPosterior): Posterior before the update.
        x_new (array-like): New input, shape (d,).
        y_new (float): Its label.

    Returns:
        float: Non-negative KL divergence.
    """
    mean, variance = gp.predict(post_t, np.asarray(x_new, dtype=float).reshape(1, -1))
    return sequential_kl_from_moments(variance[0], float(y_new) - mean[0], post_t.params.beta)


def gaussian_kl(mean0, cov0, mean1, cov1):
    """
    KL(N(mean0, cov0) || N(mean1, cov1)) for finite-dimensional Gaussians.

    Both covariances are factorized with jitter escalation.

    Raises:
        ValueError: On mismatched dimensions.
        NumericalError: If a covariance cannot be factorized.
    """
    mean0 = np.asarray(mean0, dtype=float).reshape(-1)
    mean1 = np.asarray(mean1, dtype=float).reshape(-1)
    cov0 = np.atleast_2d(np.asarray(cov0, dtype=float))
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=float))
    k = mean0.shape[0]
    if mean1.shape[0] != k or cov0.shape != (k, k) or cov1.shape != (k, k):
        raise ValueError(
            f"dimension mismatch: means {mean0.shape}, {mean1.shape}; covariances {cov0.shape}, {cov1.shape}"
        )

    try:
        factor0, _ = gp.cholesky_with_jitter(cov0)
        factor1, _ = gp.cholesky_with_jitter(cov1)
    except NumericalError as e:
        raise NumericalError(f"Gaussian KL failed: {e}") from e

    trace = np.trace(sla.cho_solve((factor1, True), cov0))
    z = sla.solve_triangular(factor1, mean1 - mean0, lower=True)
    logdet0 = 2.0 * np.sum(np.log(np.diag(factor0)))
    logdet1 = 2.0 * np.sum(np.log(np.diag(factor1)))
    value = 0.5 * (trace + z @ z - k + logdet1 - logdet0)
    return max(float(value), 0.0)


def gap_upper_bound(post_t, x_new, y_new, loss_range):
    """Deterministic bound r = KL(q_t || q_t+1) + C on the gap for one added point."""
    return GapBound(
        kl=sequential_kl(post_t, x_new, y_new),
        c=jensen_gap_constant(loss_range),
    )


def alquier_bound(empirical_risk, kl_to_prior, t, delta, loss_range):
    """
    PAC-Bayesian bound for bounded regression losses:
    risk + (KL(q || p) - log delta) / t + (b - a)^2 / 2.
    """
    if int(t) != t or t < 1:
        raise ValueError(f"t must be a positive integer, got {t}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    if kl_to_prior < 0:
        raise ValueError(f"KL to the prior must be non-negative, got {kl_to_prior}")
    return float(empirical_risk + (kl_to_prior - math.log(delta)) / t + 0.5 * loss_range.width ** 2)


def posterior_prior_kl(post, kappa):
    """
    KL(q(f_X | S) || p(f_X)) over the training inputs X, with kappa I added to both covariances.
    """
    if post.size == 0:
        return 0.0
    inputs = post.train_inputs
    mean, cov = gp.predict(post, inputs, joint=True)
    prior_cov = gp.kernel_matrix(inputs, inputs, post.params.h)
    stabilizer = kappa * np.eye(post.size)
    return gaussian_kl(mean, cov + stabilizer, np.zeros(post.size), prior_cov + stabilizer)


def expected_loss_from_moments(residuals, variances, beta):
    """Posterior-averaged loss beta/2 ((y - mu)^2 + sigma) + 1/2 log(beta / 2 pi), elementwise."""
    residuals = np.asarray(residuals, dtype=float)
    variances = np.asarray(variances, dtype=float)
    return 0.5 * beta * (residuals ** 2 + variances) + 0.5 * math.log(beta / (2.0 * math.pi))


def expected_loss_per_point(post, data):
    """Posterior-averaged loss at every row of data."""
    mean, variance = gp.predict(post, data.inputs)
    return expected_loss_from_moments(data.targets - mean, variance, post.params.beta)


def empirical_expected_risk(post, data):
    """
    Test-set approximation of the posterior expected risk:
    beta / (2 T) (sum (y_i - mu(x_i))^2 + Tr Sigma) + 1/2 log(beta / 2 pi).

    Tr Sigma is the sum of pointwise predictive variances, which equals the trace of the
    joint predictive covariance over the data inputs.
    """
    if len(data) < 1:
        raise ValueError("empirical_expected_risk needs at least one row")
    return float(np.mean(expected_loss_per_point(post, data)))
