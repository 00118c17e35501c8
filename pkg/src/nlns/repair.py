"""Repair operators: decode logits into the next complete assignment.

Both decoders only touch variables selected by the destroy mask (sanitized
against fixed variables); everything else is copied from the incoming
assignment. ``repair_sample`` draws each new value with the Gumbel-max
trick on temperature-scaled logits, so tau = 1 samples the model's belief
softmax(z) exactly and tau -> 0 approaches the greedy argmax choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gradients import softmax_rows
from .model import gumbel_noise


@dataclass(frozen=True)
class RepairProposal:
    """Next assignment plus the belief rows that produced it."""

    x_next: np.ndarray
    q: np.ndarray


def _select_rows(z, m, x, fixed):
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.int64)
    m = np.asarray(m, dtype=bool).copy()
    if z.shape[0] != x.size or m.size != x.size:
        raise ConfigError("logits, mask, and assignment sizes do not match")
    if fixed is not None:
        m &= ~np.asarray(fixed, dtype=bool)
    return z, m, x, np.flatnonzero(m)


def repair_sample(z: np.ndarray, m: np.ndarray, x: np.ndarray, tau: float,
                  rng: np.random.Generator, fixed: np.ndarray | None = None) -> RepairProposal:
    """Stochastic repair: Gumbel draws from tempered beliefs at masked rows."""
    if not tau > 0:
        raise ConfigError(f"sampling temperature must be positive, got {tau}")
    z, m, x, rows = _select_rows(z, m, x, fixed)
    q = softmax_rows(z)
    x_next = x.copy()
    if rows.size:
        noisy = z[rows] / tau + gumbel_noise(rng, (rows.size, z.shape[1]))
        x_next[rows] = np.argmax(noisy, axis=1)
        q[rows] = softmax_rows(noisy)
    return RepairProposal(x_next=x_next, q=q)


def repair_greedy(z: np.ndarray, m: np.ndarray, x: np.ndarray,
                  fixed: np.ndarray | None = None) -> RepairProposal:
    """Deterministic repair: most likely value per masked row.

    Ties go to the smallest value index. Invariant under any positive
    rescaling or constant shift of a logits row.
    """
    z, m, x, rows = _select_rows(z, m, x, fixed)
    x_next = x.copy()
    if rows.size:
        x_next[rows] = np.argmax(z[rows], axis=1)
    return RepairProposal(x_next=x_next, q=softmax_rows(z))


REPAIR_OPERATORS = {"sample": repair_sample, "greedy": repair_greedy}


def get_repair_operator(name: str):
    try:
        return REPAIR_OPERATORS[name]
    except KeyError:
        raise ConfigError(
            f"unknown repair operator {name!r}; known: {', '.join(sorted(REPAIR_OPERATORS))}"
        ) from None
