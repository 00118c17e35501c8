"""Analytic gradients of the penalty loss in belief and logit space.

The loss is L(q) = sum_k w_k * p_k(q)^2 with the pairwise co-equality
penalties from :mod:`nlns.csp`. Both gradients below are closed-form:

* NotEqual(i, j): dp/dq_i = q_j and dp/dq_j = q_i, chained through 2 w p.
* AllDifferent over scope A: dp/dq_a = (sum_{b in A} q_b) - q_a.
* Logit-space gradients chain through the row-wise softmax Jacobian,
  dL/dz_i = q_i * (g_i - <g_i, q_i>), so every row sums to zero.

The operator set is small and fixed, so these are hand-derived rather than
taped, and are cross-checked by central finite differences.
"""

from __future__ import annotations

import numpy as np

from .csp import ConstraintKind, CspInstance, loss_value, one_hot


def loss_grad_wrt_q(instance: CspInstance, q: np.ndarray) -> np.ndarray:
    """Exact dL/dq as an n x d matrix; rows of untouched variables are zero."""
    q = np.asarray(q, dtype=np.float64)
    comp = instance._compiled
    g = np.zeros_like(q)
    if comp.ne_ids.size:
        qi, qj = q[comp.ne_i], q[comp.ne_j]
        coef = 2.0 * comp.ne_w * np.einsum("kv,kv->k", qi, qj)
        np.add.at(g, comp.ne_i, coef[:, None] * qj)
        np.add.at(g, comp.ne_j, coef[:, None] * qi)
    for _k, scope, w in comp.alldiff:
        rows = q[scope]
        s = rows.sum(axis=0)
        p = 0.5 * (s @ s - (rows * rows).sum())
        g[scope] += (2.0 * w * p) * (s[None, :] - rows)
    return g


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for stability."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_backward(dq: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Chain dL/dq through the softmax Jacobian row-wise."""
    return q * (dq - np.sum(dq * q, axis=-1, keepdims=True))


def loss_grad_wrt_logits(instance: CspInstance, z: np.ndarray) -> np.ndarray:
    """Exact dL/dz for q = softmax(z) applied per row."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    q = softmax_rows(z)
    return softmax_rows_backward(loss_grad_wrt_q(instance, q), q)


def variable_violation_scores(instance: CspInstance, x: np.ndarray) -> np.ndarray:
    """Per-variable violation scores: L1 norms of dL/dq rows at one_hot(x).

    Zero for every variable whose constraints are all satisfied under x,
    since the quadratic transform has zero slope at p = 0.
    """
    g = loss_grad_wrt_q(instance, one_hot(instance, x))
    return np.abs(g).sum(axis=1)


def finite_diff_check(instance: CspInstance, point: np.ndarray, h: float = 1e-5,
                      space: str = "q") -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``space`` selects the coordinate system: "q" perturbs belief entries
    directly (the loss is a polynomial, so off-simplex points are fine),
    "logits" perturbs pre-softmax scores. Relative error uses the
    denominator max(|analytic|, |numeric|, 1e-8).
    """
    if not h > 0:
        raise ValueError("step size h must be positive")
    point = np.asarray(point, dtype=np.float64)
    if space == "q":
        analytic = loss_grad_wrt_q(instance, point)
        f = lambda m: loss_value(instance, m)
    elif space == "logits":
        analytic = loss_grad_wrt_logits(instance, point)
        f = lambda m: loss_value(instance, softmax_rows(m))
    else:
        raise ValueError(f"unknown space {space!r}")
    numeric = np.zeros_like(point)
    work = point.copy()
    for idx in np.ndindex(point.shape):
        orig = work[idx]
        work[idx] = orig + h
        up = f(work)
        work[idx] = orig - h
        down = f(work)
        work[idx] = orig
        numeric[idx] = (up - down) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
