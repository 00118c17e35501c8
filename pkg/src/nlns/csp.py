"""Finite-domain CSP instances with hard checks and differentiable penalties.

An instance holds ``n`` variables over a shared ordered value domain, a list
of weighted constraints, and optional pre-assigned "given" variables that no
operator may modify. A hard assignment is a length-``n`` vector of domain
indices; a soft assignment is a row-stochastic ``n x d`` matrix whose row i
is the current belief over variable i's values.

The soft penalty of a constraint is zero exactly when the belief puts no
mass on any co-equal outcome, and at one-hot points the weighted penalty
loss is zero if and only if the discrete assignment is feasible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NlnsError


class ProblemKind(enum.Enum):
    SUDOKU = "sudoku"
    GRAPH_COLORING = "coloring"
    MAXCUT = "maxcut"


class ConstraintKind(enum.Enum):
    ALL_DIFFERENT = "all_different"
    NOT_EQUAL = "not_equal"


# Constraint vocabulary is deliberately tiny: permutation-style problems use
# AllDifferent, edge-based problems use NotEqual.
_ALLOWED_KINDS = {
    ProblemKind.SUDOKU: {ConstraintKind.ALL_DIFFERENT},
    ProblemKind.GRAPH_COLORING: {ConstraintKind.NOT_EQUAL},
    ProblemKind.MAXCUT: {ConstraintKind.NOT_EQUAL},
}

PROB_ROW_ATOL = 1e-6


@dataclass(frozen=True)
class Constraint:
    """A weighted relation over an ordered scope of variable indices."""

    kind: ConstraintKind
    scope: tuple[int, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(i) for i in self.scope))
        if self.kind is ConstraintKind.NOT_EQUAL and len(self.scope) != 2:
            raise NlnsError(f"NotEqual scope must have exactly 2 variables, got {len(self.scope)}")
        if self.kind is ConstraintKind.ALL_DIFFERENT and len(self.scope) < 2:
            raise NlnsError(f"AllDifferent scope must have >= 2 variables, got {len(self.scope)}")
        if len(set(self.scope)) != len(self.scope):
            raise NlnsError(f"constraint scope has repeated variable: {self.scope}")
        if not self.weight > 0:
            raise NlnsError(f"constraint weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class PenaltyReport:
    """Per-constraint soft penalties plus the weighted quadratic total."""

    per_constraint: np.ndarray  # p_k >= 0, length m
    total_loss: float           # sum_k weight_k * p_k**2
    violated_count: int         # constraints with p_k > 0


@dataclass(frozen=True, eq=False)
class CspInstance:
    """Immutable CSP instance over a homogeneous finite domain.

    ``domain`` holds the ordered value labels shared by every variable
    (e.g. digits 1..9 for Sudoku, colors 0..k-1 for coloring). ``fixed``
    marks given variables; ``given_values`` carries their domain index
    (-1 on free positions). ``ground_truth`` optionally stores a full
    reference solution as domain indices.
    """

    problem_kind: ProblemKind
    domain: tuple
    constraints: tuple[Constraint, ...]
    fixed: np.ndarray
    given_values: np.ndarray
    ground_truth: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "fixed", np.asarray(self.fixed, dtype=bool))
        object.__setattr__(self, "given_values", np.asarray(self.given_values, dtype=np.int64))
        if self.ground_truth is not None:
            object.__setattr__(self, "ground_truth", np.asarray(self.ground_truth, dtype=np.int64))
        self._validate()
        self.fixed.setflags(write=False)
        self.given_values.setflags(write=False)
        if self.ground_truth is not None:
            self.ground_truth.setflags(write=False)

    def _validate(self):
        n, d = self.n, self.domain_size
        if d == 0:
            raise NlnsError("domain must be nonempty")
        if self.given_values.shape != (n,):
            raise NlnsError("given_values length must match variable count")
        allowed = _ALLOWED_KINDS[self.problem_kind]
        for k, c in enumerate(self.constraints):
            if c.kind not in allowed:
                raise NlnsError(f"{self.problem_kind.value} does not allow {c.kind.value} constraints")
            for i in c.scope:
                if not 0 <= i < n:
                    raise NlnsError(f"constraint {k} scope index {i} out of range [0, {n})")
        gv = self.given_values[self.fixed]
        if gv.size and (gv.min() < 0 or gv.max() >= d):
            raise NlnsError("given value index out of domain range")
        if self.ground_truth is not None:
            if self.ground_truth.shape != (n,):
                raise NlnsError("ground truth length must match variable count")
            if self.ground_truth.size and (self.ground_truth.min() < 0 or self.ground_truth.max() >= d):
                raise NlnsError("ground truth value index out of domain range")

    @property
    def n(self) -> int:
        return int(self.fixed.shape[0])

    @property
    def domain_size(self) -> int:
        return len(self.domain)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @cached_property
    def free_mask(self) -> np.ndarray:
        m = ~self.fixed
        m.setflags(write=False)
        return m

    @cached_property
    def free_indices(self) -> np.ndarray:
        idx = np.flatnonzero(self.free_mask)
        idx.setflags(write=False)
        return idx

    @property
    def n_free(self) -> int:
        return int(self.free_indices.size)

    @cached_property
    def _compiled(self) -> "_Compiled":
        return _Compiled(self)

    def structurally_equal(self, other: "CspInstance") -> bool:
        return (
            self.problem_kind is other.problem_kind
            and self.domain == other.domain
            and self.constraints == other.constraints
            and np.array_equal(self.fixed, other.fixed)
            and np.array_equal(self.given_values, other.given_values)
            and (
                (self.ground_truth is None and other.ground_truth is None)
                or (
                    self.ground_truth is not None
                    and other.ground_truth is not None
                    and np.array_equal(self.ground_truth, other.ground_truth)
                )
            )
        )


class _Compiled:
    """Constraint structure flattened into arrays for vectorized evaluation."""

    def __init__(self, inst: CspInstance):
        ne_ids, ne_i, ne_j, ne_w = [], [], [], []
        ad = []
        touch = np.zeros(inst.n, dtype=np.int64)
        for k, c in enumerate(inst.constraints):
            touch[list(c.scope)] += 1
            if c.kind is ConstraintKind.NOT_EQUAL:
                ne_ids.append(k)
                ne_i.append(c.scope[0])
                ne_j.append(c.scope[1])
                ne_w.append(c.weight)
            else:
                ad.append((k, np.array(c.scope, dtype=np.int64), c.weight))
        self.ne_ids = np.array(ne_ids, dtype=np.int64)
        self.ne_i = np.array(ne_i, dtype=np.int64)
        self.ne_j = np.array(ne_j, dtype=np.int64)
        self.ne_w = np.array(ne_w, dtype=np.float64)
        self.alldiff = ad
        self.touch_count = touch
        self.weights = np.array([c.weight for c in inst.constraints], dtype=np.float64)


def validate_assignment(instance: CspInstance, x: np.ndarray) -> np.ndarray:
    """Check shape, domain bounds, and given-value pinning; return int array."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (instance.n,):
        raise NlnsError(f"assignment shape {x.shape} does not match n={instance.n}")
    if x.size and (x.min() < 0 or x.max() >= instance.domain_size):
        raise NlnsError("assignment value index out of domain range")
    if not np.array_equal(x[instance.fixed], instance.given_values[instance.fixed]):
        raise NlnsError("assignment overrides a given variable")
    return x


def _check_soft(instance: CspInstance, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (instance.n, instance.domain_size):
        raise NlnsError(f"soft assignment shape {q.shape}, expected {(instance.n, instance.domain_size)}")
    if np.any(q < -1e-9):
        raise NlnsError("malformed probability row: negative entry")
    sums = q.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_ROW_ATOL)
    if bad.size:
        raise NlnsError(f"malformed probability row {bad[0]}: sums to {sums[bad[0]]!r}")
    return q


def eval_hard(instance: CspInstance, x: np.ndarray) -> tuple[int, list[int]]:
    """Count hard-violated constraints and return their indices.

    AllDifferent is violated by any duplicate value in its scope, NotEqual
    by equal endpoint values.
    """
    x = validate_assignment(instance, x)
    violated = []
    for k, c in enumerate(instance.constraints):
        vals = x[list(c.scope)]
        if c.kind is ConstraintKind.NOT_EQUAL:
            if vals[0] == vals[1]:
                violated.append(k)
        else:
            if np.unique(vals).size != vals.size:
                violated.append(k)
    return len(violated), violated


def cost(instance: CspInstance, x: np.ndarray) -> int:
    """Number of hard-violated constraints under x."""
    return assignment_report(instance, x).violated_count


def cut_size(instance: CspInstance, x: np.ndarray) -> int:
    """Satisfied edge count for a 2-part split; defined for MaxCut instances."""
    if instance.problem_kind is not ProblemKind.MAXCUT:
        raise NlnsError("cut_size is only defined for MaxCut instances")
    return instance.n_constraints - cost(instance, x)


def one_hot(instance: CspInstance, x: np.ndarray) -> np.ndarray:
    """Indicator encoding of a hard assignment as an n x d soft assignment."""
    x = validate_assignment(instance, x)
    q = np.zeros((instance.n, instance.domain_size), dtype=np.float64)
    q[np.arange(instance.n), x] = 1.0
    return q


def constraint_penalty(c: Constraint, q: np.ndarray) -> float:
    """Soft penalty of one constraint under belief rows q.

    NotEqual(i, j) is the co-equality mass ``sum_v q_i(v) q_j(v)``;
    AllDifferent sums that quantity over all unordered scope pairs.
    """
    q = np.asarray(q, dtype=np.float64)
    rows = q[list(c.scope)]
    if np.any(rows < -1e-9) or np.any(np.abs(rows.sum(axis=1) - 1.0) > PROB_ROW_ATOL):
        raise NlnsError("malformed probability row in constraint scope")
    return _penalty_of_rows(c.kind, rows)


def _penalty_of_rows(kind: ConstraintKind, rows: np.ndarray) -> float:
    if kind is ConstraintKind.NOT_EQUAL:
        return float(rows[0] @ rows[1])
    # Pairwise co-equality sum via (sum q)^2 - sum q^2, halved.
    s = rows.sum(axis=0)
    return float(0.5 * (s @ s - (rows * rows).sum()))


def penalty_values(instance: CspInstance, q: np.ndarray) -> np.ndarray:
    """Vector of per-constraint penalties p_k; no probability validation."""
    q = np.asarray(q, dtype=np.float64)
    comp = instance._compiled
    p = np.zeros(instance.n_constraints, dtype=np.float64)
    if comp.ne_ids.size:
        p[comp.ne_ids] = np.einsum("kv,kv->k", q[comp.ne_i], q[comp.ne_j])
    for k, scope, _w in comp.alldiff:
        rows = q[scope]
        s = rows.sum(axis=0)
        p[k] = 0.5 * (s @ s - (rows * rows).sum())
    return p


def loss_value(instance: CspInstance, q: np.ndarray) -> float:
    """Weighted quadratic penalty loss; no probability validation."""
    p = penalty_values(instance, q)
    return float(instance._compiled.weights @ (p * p))


def total_loss(instance: CspInstance, q: np.ndarray) -> PenaltyReport:
    """Evaluate the soft penalty loss L = sum_k weight_k * p_k^2."""
    q = _check_soft(instance, q)
    p = penalty_values(instance, q)
    return PenaltyReport(
        per_constraint=p,
        total_loss=float(instance._compiled.weights @ (p * p)),
        violated_count=int(np.count_nonzero(p > 0.0)),
    )


def assignment_report(instance: CspInstance, x: np.ndarray) -> PenaltyReport:
    """PenaltyReport of a hard assignment, computed discretely.

    Equals ``total_loss(instance, one_hot(instance, x))`` exactly: penalties
    at one-hot points are integer pair counts, so both paths are exact.
    """
    x = validate_assignment(instance, x)
    comp = instance._compiled
    p = np.zeros(instance.n_constraints, dtype=np.float64)
    if comp.ne_ids.size:
        p[comp.ne_ids] = (x[comp.ne_i] == x[comp.ne_j]).astype(np.float64)
    for k, scope, _w in comp.alldiff:
        counts = np.bincount(x[scope], minlength=instance.domain_size)
        p[k] = float((counts * (counts - 1) // 2).sum())
    return PenaltyReport(
        per_constraint=p,
        total_loss=float(comp.weights @ (p * p)),
        violated_count=int(np.count_nonzero(p > 0.0)),
    )


def conflict_fractions(instance: CspInstance, x: np.ndarray) -> np.ndarray:
    """Per-variable fraction of touching constraints that are violated.

    Used as a structural input feature for edge-based problems where token
    positions alone carry no adjacency information.
    """
    x = np.asarray(x, dtype=np.int64)
    comp = instance._compiled
    violated = np.zeros(instance.n, dtype=np.float64)
    if comp.ne_ids.size:
        eq = x[comp.ne_i] == x[comp.ne_j]
        np.add.at(violated, comp.ne_i[eq], 1.0)
        np.add.at(violated, comp.ne_j[eq], 1.0)
    for _k, scope, _w in comp.alldiff:
        if np.unique(x[scope]).size != scope.size:
            violated[scope] += 1.0
    return violated / np.maximum(comp.touch_count, 1)
