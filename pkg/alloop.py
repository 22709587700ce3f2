"""
Pool-based active learning with maximum-variance acquisition and stopping criteria.

Every step labels one pool point, records the bound r_t on the change in expected
generalization error, and evaluates each configured criterion. Criteria are scored
passively: all of them see the same trace, and only the optional primary criterion
ends the loop early.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

import bounds
import gp
import runstest
from utils import make_rng

KINDS = ("proposed", "pac_bayes", "cross_validation", "max_variance", "ground_truth")

# Fields each criterion kind must set; the rest must stay None.
_REQUIRED_FIELDS = {
    "proposed": ("alpha", "min_sequence_length"),
    "pac_bayes": ("threshold", "delta", "kappa", "loss_range"),
    "cross_validation": ("threshold", "folds"),
    "max_variance": ("threshold",),
    "ground_truth": ("threshold",),
}
_OPTIONAL_FIELDS = ("alpha", "threshold", "delta", "kappa", "loss_range", "folds", "min_sequence_length")

# Statistic comparisons: threshold criteria fire when statistic < threshold, except the
# ground-truth criterion, which fires once the test-risk improvement exceeds it.
_FIRES_ABOVE = {"ground_truth"}


@dataclass
class BoundTrace:
    """
    Per-step bound values r_t = KL_t + C, the KL terms alone, and the runs-test reports.

    stop_step is the first step at which the proposed criterion fired, if it did.
    """
    r_values: list = field(default_factory=list)
    kl_values: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    stop_step: int = None

    def append(self, bound, decision=None):
        self.r_values.append(bound.r)
        self.kl_values.append(bound.kl)
        self.decisions.append(decision)

    def __len__(self):
        return len(self.r_values)


@dataclass(frozen=True)
class CriterionConfig:
    """
    Settings of one stopping criterion.

    Exactly the fields the kind uses are required:
        proposed: alpha, min_sequence_length (plus mode, sided, exact_max_length)
        pac_bayes: threshold, delta, kappa, loss_range
        cross_validation: threshold, folds
        max_variance, ground_truth: threshold
    """
    kind: str
    alpha: float = None
    threshold: float = None
    delta: float = None
    kappa: float = None
    loss_range: bounds.LossRange = None
    folds: int = None
    min_sequence_length: int = None
    mode: str = "auto"
    sided: str = "two"
    exact_max_length: int = 30

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown criterion kind '{self.kind}', expected one of {KINDS}")
        required = _REQUIRED_FIELDS[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Criterion '{self.kind}' requires {missing}")
        extra = [name for name in _OPTIONAL_FIELDS if name not in required and getattr(self, name) is not None]
        if extra:
            raise ValueError(f"Criterion '{self.kind}' does not use {extra}")

        if self.alpha is not None and not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if self.min_sequence_length is not None and self.min_sequence_length < 2:
            raise ValueError(f"min_sequence_length must be at least 2, got {self.min_sequence_length}")
        if self.threshold is not None and math.isnan(self.threshold):
            raise ValueError("threshold must be a number")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.folds is not None and (int(self.folds) != self.folds or self.folds < 2):
            raise ValueError(f"folds must be an integer >= 2, got {self.folds}")
        runstest.resolve_mode(self.mode, 0)
        if self.sided not in runstest.SIDES:
            raise ValueError(f"sided must be one of {runstest.SIDES}, got {self.sided!r}")

    def with_threshold(self, threshold):
        return replace(self, threshold=float(threshold))


@dataclass
class ALTrace:
    """
    Record of one active-learning run.

    Attributes:
        chosen_indices (list): Pool indices in labeling order; step t labeled chosen_indices[t - 1].
        test_risk (list): Expected test risk of the posterior after each step (empty without a test set).
        bound_trace (BoundTrace): r_t, KL_t and runs-test reports per step.
        stop_steps (dict): First step each criterion fired, None when it never did.
        statistics (dict): Per-step statistic of each criterion (z for the proposed one).
        fired (dict): Per-step firing flags of each criterion.
        params (KernelParams): Hyperparameters in effect at the end of the run.
        prior_risk (float): Expected test risk under the prior, None without a test set.
    """
    chosen_indices: list = field(default_factory=list)
    test_risk: list = field(default_factory=list)
    bound_trace: BoundTrace = field(default_factory=BoundTrace)
    stop_steps: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    fired: dict = field(default_factory=dict)
    params: gp.KernelParams = None
    prior_risk: float = None

    @property
    def n_steps(self):
        return len(self.chosen_indices)


def argmax_unlabeled(variances, labeled_mask):
    """Index of the largest variance among unlabeled entries, lowest index on ties."""
    variances = np.asarray(variances, dtype=float)
    labeled = np.asarray(labeled_mask, dtype=bool)
    if labeled.all():
        raise ValueError("the pool is exhausted: every point is labeled")
    masked = np.where(labeled, -np.inf, variances)
    return int(np.argmax(masked))


def select_next(post, pool, labeled_mask):
    """Unlabeled pool index with the maximal predictive variance under the current posterior."""
    if np.asarray(labeled_mask, dtype=bool).all():
        raise ValueError("the pool is exhausted: every point is labeled")
    _, variances = gp.predict(post, pool.inputs)
    return argmax_unlabeled(variances, labeled_mask)


def proposed_decision(r_values, cfg):
    """
    Runs-test decision on the bound sequence.

    Returns:
        tuple: (stop, report). report is None while the burn-in guard holds.
    """
    if len(r_values) < cfg.min_sequence_length:
        return False, None
    bits = runstest.binarize_by_median(r_values)
    report = runstest.runs_test(bits, cfg.alpha, cfg.mode, cfg.sided, cfg.exact_max_length)
    if report.degenerate:
        return False, report
    if not runstest.can_reject(bits.t0, bits.t1, cfg.alpha, cfg.mode, cfg.sided, cfg.exact_max_length):
        return False, report
    return not report.reject_randomness, report


def stop_proposed(trace, cfg):
    """
    Stop once the median-binarized bound sequence looks random.

    True iff the sequence has at least min_sequence_length entries, both symbols occur,
    the runs test could reject at level alpha for these symbol counts, and it does not.
    """
    _require_kind(cfg, "proposed")
    return proposed_decision(trace.r_values, cfg)[0]


def pac_bayes_statistic(post, train, cfg):
    """a_t = risk_S(q) + (KL(q || p) - log delta) / t + (b - a)^2 / 2 over the labeled data."""
    risk = bounds.empirical_expected_risk(post, train)
    kl = bounds.posterior_prior_kl(post, cfg.kappa)
    return bounds.alquier_bound(risk, kl, len(train), cfg.delta, cfg.loss_range)


def stop_pac_bayes(post, train, cfg):
    _require_kind(cfg, "pac_bayes")
    return pac_bayes_statistic(post, train, cfg) < cfg.threshold


def cross_validation_risk(train, params, folds, seed=0):
    """
    Mean held-out expected risk over `folds` folds of the labeled data.

    The fold assignment is a permutation drawn from `seed`, so it is reproducible.
    """
    n = len(train)
    if int(folds) != folds or folds < 2:
        raise ValueError(f"folds must be an integer >= 2, got {folds}")
    if n < folds:
        raise ValueError(f"{folds}-fold cross validation needs at least {folds} samples, got {n}")

    order = make_rng(seed).permutation(n)
    risks = []
    for held_out in np.array_split(order, int(folds)):
        kept = np.setdiff1d(order, held_out, assume_unique=True)
        post = gp.fit_posterior(train.subset(kept), params)
        risks.append(bounds.empirical_expected_risk(post, train.subset(held_out)))
    return float(np.mean(risks))


def stop_cross_validation(train, params, cfg, seed=0):
    _require_kind(cfg, "cross_validation")
    return cross_validation_risk(train, params, cfg.folds, seed) < cfg.threshold


def max_pool_variance(post, pool, labeled_mask=None):
    """
    Largest predictive variance over the unlabeled pool points.

    Without a mask every pool point counts; a fully labeled pool has nothing left to learn, so 0.
    """
    _, variances = gp.predict(post, pool.inputs)
    if labeled_mask is None:
        return float(variances.max())
    unlabeled = ~np.asarray(labeled_mask, dtype=bool)
    if not unlabeled.any():
        return 0.0
    return float(variances[unlabeled].max())


def stop_max_variance(post, pool, cfg, labeled_mask=None):
    _require_kind(cfg, "max_variance")
    return max_pool_variance(post, pool, labeled_mask) < cfg.threshold


def prior_expected_risk(params, test):
    """Expected test risk of the zero-mean GP prior."""
    return bounds.empirical_expected_risk(gp.prior_posterior(params, test.dim), test)


def risk_improvement(prior_risk, post, test):
    """R_test = prior risk - posterior risk on the test data."""
    return float(prior_risk - bounds.empirical_expected_risk(post, test))


def stop_ground_truth(prior_risk, post, test, cfg):
    _require_kind(cfg, "ground_truth")
    if len(test) < 1:
        raise ValueError("the ground-truth criterion needs a non-empty test set")
    return risk_improvement(prior_risk, post, test) > cfg.threshold


def statistic_fires(kind, statistic, threshold):
    """Whether a recorded threshold statistic fires at `threshold`. NaN never fires."""
    if statistic is None or math.isnan(statistic):
        return False
    if kind in _FIRES_ABOVE:
        return statistic > threshold
    return statistic < threshold


def first_firing_step(kind, statistics, threshold):
    """1-based step at which the statistic first fires, None if it never does."""
    for step, statistic in enumerate(statistics, start=1):
        if statistic_fires(kind, statistic, threshold):
            return step
    return None


def _require_kind(cfg, kind):
    if cfg.kind != kind:
        raise ValueError(f"expected a '{kind}' criterion, got '{cfg.kind}'")


def _evaluate(cfg, state):
    """(statistic, fired) of one criterion at the current step."""
    kind = cfg.kind
    if kind == "proposed":
        stop, report = proposed_decision(state["trace"].bound_trace.r_values, cfg)
        state["report"] = report
        z = report.z if report is not None else float("nan")
        return z, stop

    if kind == "pac_bayes":
        statistic = pac_bayes_statistic(state["post"], state["train"], cfg)
    elif kind == "cross_validation":
        if len(state["train"]) < cfg.folds:
            return float("nan"), False
        statistic = cross_validation_risk(state["train"], state["post"].params, cfg.folds, state["cv_seed"])
    elif kind == "max_variance":
        statistic = max_pool_variance(state["post"], state["pool"], state["mask"])
    else:
        statistic = risk_improvement(state["prior_risk"], state["post"], state["test"])
    return statistic, statistic_fires(kind, statistic, cfg.threshold)


def run_active_learning(pool, test, params, criteria, loss_range, max_steps=None, seed=0,
                        primary=None, refit_grids=None, verbose=False):
    """
    Run maximum-variance active learning on a labeled pool.

    Step 1 labels a uniformly random pool point; every later step labels the unlabeled
    point with the largest current predictive variance. At step t the bound r_t covers the
    move from the posterior after t - 1 points (the prior for t = 1) to the one after t.

    Args:
        pool (LabeledDataset): Candidate points with their labels; at least 2 rows.
        test (LabeledDataset): Held-out data for the per-step test risk, or None.
        params (KernelParams): GP hyperparameters, fixed for the run unless refit_grids is set.
        criteria (list): CriterionConfig entries, at most one per kind.
        loss_range (LossRange): [a, b] for the Jensen-gap constant.
        max_steps (int): Step limit, None for the pool size.
        seed (int): Seed for the first point and the cross-validation folds.
        primary (str): Kind whose first firing ends the run; None runs to max_steps.
        refit_grids (tuple): (h_grid, beta_grid) to refit hyperparameters after every step.
        verbose (bool): Print one progress line per step.

    Returns:
        ALTrace: The run record.
    """
    if len(pool) < 2:
        raise ValueError(f"the pool needs at least 2 points, got {len(pool)}")
    max_steps = len(pool) if max_steps is None else int(max_steps)
    if not 1 <= max_steps <= len(pool):
        raise ValueError(f"max_steps must be in [1, {len(pool)}], got {max_steps}")
    kinds = [cfg.kind for cfg in criteria]
    if len(set(kinds)) != len(kinds):
        raise ValueError(f"each criterion kind may appear once, got {kinds}")
    if primary is not None and primary not in kinds:
        raise ValueError(f"primary criterion '{primary}' is not among the configured criteria {kinds}")
    if "ground_truth" in kinds and test is None:
        raise ValueError("the ground-truth criterion needs a test set")

    rng = make_rng(seed)
    post = gp.prior_posterior(params, pool.dim)
    mask = np.zeros(len(pool), dtype=bool)
    trace = ALTrace(
        stop_steps={kind: None for kind in kinds},
        statistics={kind: [] for kind in kinds},
        fired={kind: [] for kind in kinds},
        params=params,
    )
    if test is not None:
        trace.prior_risk = prior_expected_risk(params, test)
    c_constant = bounds.jensen_gap_constant(loss_range)

    for step in range(1, max_steps + 1):
        index = int(rng.integers(len(pool))) if step == 1 else select_next(post, pool, mask)
        x_new, y_new = pool.inputs[index], pool.targets[index]

        kl = bounds.sequential_kl(post, x_new, y_new)
        post = gp.update_posterior(post, x_new, y_new)
        mask[index] = True
        trace.chosen_indices.append(index)
        train = pool.subset(trace.chosen_indices)

        if refit_grids is not None and len(train) >= 2:
            refit = gp.optimize_hyperparameters(train, *refit_grids)
            if refit != post.params:
                post = gp.fit_posterior(train, refit)
            trace.params = refit

        if test is not None:
            trace.test_risk.append(bounds.empirical_expected_risk(post, test))

        state = {
            "trace": trace, "post": post, "pool": pool, "mask": mask, "train": train,
            "test": test, "prior_risk": trace.prior_risk, "cv_seed": (seed, step), "report": None,
        }
        bound = bounds.GapBound(kl=kl, c=c_constant)
        # r_t must be in the trace before the proposed criterion looks at it
        trace.bound_trace.append(bound)

        stop_now = False
        for cfg in criteria:
            statistic, fired = _evaluate(cfg, state)
            trace.statistics[cfg.kind].append(statistic)
            trace.fired[cfg.kind].append(bool(fired))
            if fired and trace.stop_steps[cfg.kind] is None:
                trace.stop_steps[cfg.kind] = step
            if fired and cfg.kind == primary:
                stop_now = True
        trace.bound_trace.decisions[-1] = state["report"]

        if verbose:
            risk = f", test risk {trace.test_risk[-1]:.4f}" if trace.test_risk else ""
            print(f"[+] Step {step}: labeled pool index {index}, r_t {bound.r:.4g}{risk}")
        if stop_now:
            if verbose:
                print(f"[+] Criterion '{primary}' stopped the run at step {step}.")
            break

    trace.bound_trace.stop_step = trace.stop_steps.get("proposed")
    return trace
