"""Destroy operators: rules that pick which variables to re-solve.

Every operator maps a :class:`DestroyContext` to a boolean mask over the
variables. Fixed (given) variables are never selected. Operators guarantee a
nonempty selection whenever free variables exist: stochastic draws are
resampled up to 16 times, then one free variable is forced.

Greedy variants rank by a score and take the ``ceil(rate * n_free)`` best
(ties broken by ascending variable index); stochastic variants rescale the
scores into Bernoulli probabilities whose mean over free variables matches
the destruction rate. Prediction-guided operators read the logits left by
the previous repair pass and fall back to random removal on the first
iteration or when their score signal is identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .csp import CspInstance, PenaltyReport, assignment_report
from .errors import ConfigError
from .gradients import loss_grad_wrt_logits, softmax_rows, variable_violation_scores

RATE_TOL = 1e-3
_MAX_RESAMPLE = 16


@dataclass
class DestroyContext:
    """Solver state visible to destroy operators."""

    instance: CspInstance
    x: np.ndarray
    rate: float
    rng: np.random.Generator
    logits: np.ndarray | None = None          # from the previous repair pass
    penalties: PenaltyReport | None = None    # report on x, filled lazily

    def __post_init__(self):
        if not 0 < self.rate <= 1:
            raise ConfigError(f"destruction rate must be in (0, 1], got {self.rate}")
        if self.logits is not None:
            expect = (self.instance.n, self.instance.domain_size)
            if self.logits.shape != expect:
                raise ConfigError(f"logits shape {self.logits.shape}, expected {expect}")

    def penalty_report(self) -> PenaltyReport:
        if self.penalties is None:
            self.penalties = assignment_report(self.instance, self.x)
        return self.penalties


def normalize_scores_to_rate(scores: np.ndarray, rate: float, n_free: int) -> np.ndarray | None:
    """Rescale nonnegative scores into per-variable selection probabilities.

    Bisects a scale c so that mean(clamp(c * scores, 0, 1)) over the n_free
    free variables lands within RATE_TOL of the rate, or saturates with every
    positive entry clamped at 1 when the rate is unreachable. Returns None
    when all scores are zero (no signal; callers fall back to random removal).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if np.any(scores < 0):
        raise ConfigError("scores must be nonnegative")
    positive = scores > 0
    if not positive.any():
        return None
    # Upper bound: every positive score clamped at 1.
    c_hi = 1.0 / scores[positive].min()
    if positive.sum() / n_free <= rate + RATE_TOL:
        return np.clip(c_hi * scores, 0.0, 1.0)
    c_lo = 0.0
    pi = np.clip(c_hi * scores, 0.0, 1.0)
    for _ in range(20):
        c = 0.5 * (c_lo + c_hi)
        pi = np.clip(c * scores, 0.0, 1.0)
        mean = pi.sum() / n_free
        if abs(mean - rate) <= RATE_TOL:
            break
        if mean < rate:
            c_lo = c
        else:
            c_hi = c
    return pi


def _draw_bernoulli(ctx: DestroyContext, pi: np.ndarray) -> np.ndarray:
    """Sample a mask from per-variable probabilities; never empty, never fixed."""
    free = ctx.instance.free_indices
    mask = np.zeros(ctx.instance.n, dtype=bool)
    if free.size == 0:
        return mask
    for _ in range(_MAX_RESAMPLE):
        draw = ctx.rng.random(free.size) < pi[free]
        if draw.any():
            mask[free] = draw
            return mask
    mask[ctx.rng.choice(free)] = True
    return mask


def _top_k(ctx: DestroyContext, scores: np.ndarray, smallest: bool = False) -> np.ndarray:
    """Deterministic top-k of free variables; ties resolved by ascending index."""
    inst = ctx.instance
    k = min(math.ceil(ctx.rate * inst.n_free), inst.n_free)
    mask = np.zeros(inst.n, dtype=bool)
    if k == 0:
        return mask
    key = scores.astype(np.float64).copy()
    if not smallest:
        key = -key
    key[inst.fixed] = np.inf  # fixed variables sort last
    order = np.argsort(key, kind="stable")
    mask[order[:k]] = True
    return mask


def random_destroy(ctx: DestroyContext) -> np.ndarray:
    """Independent Bernoulli(rate) over every free variable."""
    pi = np.full(ctx.instance.n, ctx.rate)
    return _draw_bernoulli(ctx, pi)


def worst_greedy(ctx: DestroyContext) -> np.ndarray:
    """Select the variables with the largest violation scores."""
    return _top_k(ctx, variable_violation_scores(ctx.instance, ctx.x))


def worst_stochastic(ctx: DestroyContext) -> np.ndarray:
    """Bernoulli draws biased toward high violation scores."""
    v = variable_violation_scores(ctx.instance, ctx.x)
    v[ctx.instance.fixed] = 0.0
    pi = normalize_scores_to_rate(v, ctx.rate, ctx.instance.n_free)
    if pi is None:
        return random_destroy(ctx)
    return _draw_bernoulli(ctx, pi)


def _constraint_rate(ctx: DestroyContext) -> float:
    """Per-constraint rate rescaled so expected coverage tracks rate * n."""
    inst = ctx.instance
    m = inst.n_constraints
    mean_scope = sum(len(c.scope) for c in inst.constraints) / m
    return min(1.0, ctx.rate * inst.n / (mean_scope * m))


def related_stochastic(ctx: DestroyContext) -> np.ndarray:
    """Destroy the union of the scopes of a random constraint subset."""
    inst = ctx.instance
    if inst.n_constraints == 0 or inst.n_free == 0:
        return random_destroy(ctx)
    rate_c = _constraint_rate(ctx)
    for _ in range(_MAX_RESAMPLE):
        chosen = ctx.rng.random(inst.n_constraints) < rate_c
        mask = np.zeros(inst.n, dtype=bool)
        for k in np.flatnonzero(chosen):
            mask[list(inst.constraints[k].scope)] = True
        mask &= inst.free_mask
        if mask.any():
            return mask
    return random_destroy(ctx)


def related_greedy(ctx: DestroyContext) -> np.ndarray:
    """Destroy scopes of the most-violated constraints until coverage is met.

    Constraints are ranked by current penalty (ties by ascending index) and
    consumed until the scope union covers ceil(rate * n_free) free variables
    or no constraints remain.
    """
    inst = ctx.instance
    if inst.n_constraints == 0 or inst.n_free == 0:
        return random_destroy(ctx)
    p = ctx.penalty_report().per_constraint
    order = np.argsort(-p, kind="stable")
    target = min(math.ceil(ctx.rate * inst.n_free), inst.n_free)
    mask = np.zeros(inst.n, dtype=bool)
    for k in order:
        mask[list(inst.constraints[k].scope)] = True
        mask &= inst.free_mask
        if mask.sum() >= target:
            break
    if not mask.any():
        return random_destroy(ctx)
    return mask


def _logit_gradient_scores(ctx: DestroyContext) -> np.ndarray | None:
    if ctx.logits is None:
        return None
    g = loss_grad_wrt_logits(ctx.instance, ctx.logits)
    scores = np.abs(g).sum(axis=1)
    scores[ctx.instance.fixed] = 0.0
    if not (scores > 0).any():
        return None
    return scores


def gradient_greedy(ctx: DestroyContext) -> np.ndarray:
    """Select variables whose beliefs most strongly affect the penalty loss."""
    scores = _logit_gradient_scores(ctx)
    if scores is None:
        return random_destroy(ctx)
    return _top_k(ctx, scores)


def gradient_stochastic(ctx: DestroyContext) -> np.ndarray:
    scores = _logit_gradient_scores(ctx)
    if scores is None:
        return random_destroy(ctx)
    pi = normalize_scores_to_rate(scores, ctx.rate, ctx.instance.n_free)
    if pi is None:
        return random_destroy(ctx)
    return _draw_bernoulli(ctx, pi)


def _confidence_margins(ctx: DestroyContext) -> np.ndarray | None:
    """Gap between the top two belief probabilities per variable."""
    if ctx.logits is None:
        return None
    q = softmax_rows(ctx.logits)
    top2 = np.sort(q, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def confidence_greedy(ctx: DestroyContext) -> np.ndarray:
    """Select the variables the model is least certain about."""
    margins = _confidence_margins(ctx)
    if margins is None:
        return random_destroy(ctx)
    return _top_k(ctx, margins, smallest=True)


def confidence_stochastic(ctx: DestroyContext) -> np.ndarray:
    margins = _confidence_margins(ctx)
    if margins is None:
        return random_destroy(ctx)
    scores = 1.0 - margins  # order-reversing, bounded in [0, 1]
    scores[ctx.instance.fixed] = 0.0
    pi = normalize_scores_to_rate(scores, ctx.rate, ctx.instance.n_free)
    if pi is None:
        return random_destroy(ctx)
    return _draw_bernoulli(ctx, pi)


DESTROY_OPERATORS = {
    "random": random_destroy,
    "worst-greedy": worst_greedy,
    "worst-stochastic": worst_stochastic,
    "related-greedy": related_greedy,
    "related-stochastic": related_stochastic,
    "gradient-greedy": gradient_greedy,
    "gradient-stochastic": gradient_stochastic,
    "confidence-greedy": confidence_greedy,
    "confidence-stochastic": confidence_stochastic,
}


def get_destroy_operator(name: str):
    try:
        return DESTROY_OPERATORS[name]
    except KeyError:
        raise ConfigError(
            f"unknown destroy operator {name!r}; known: {', '.join(sorted(DESTROY_OPERATORS))}"
        ) from None
