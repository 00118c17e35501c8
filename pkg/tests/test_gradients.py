"""Analytic penalty gradients against hand expansions and finite differences."""

import numpy as np
import pytest

from nlns import (
    Constraint,
    ConstraintKind,
    CspInstance,
    ProblemKind,
    finite_diff_check,
    loss_grad_wrt_logits,
    loss_grad_wrt_q,
    one_hot,
    variable_violation_scores,
)
from nlns.gradients import loss_value, softmax_rows
from conftest import make_coloring, random_instance


def numeric_grad(instance, point, h=1e-5, space="q"):
    """Plain central differences, written independently of the library path."""
    if space == "q":
        f = lambda m: loss_value(instance, m)
    else:
        f = lambda m: loss_value(instance, softmax_rows(m))
    g = np.zeros_like(point)
    w = point.copy()
    for idx in np.ndindex(point.shape):
        orig = w[idx]
        w[idx] = orig + h
        up = f(w)
        w[idx] = orig - h
        dn = f(w)
        w[idx] = orig
        g[idx] = (up - dn) / (2 * h)
    return g


class TestLossGradQ:
    def test_feasible_one_hot_zero_gradient(self, triangle3):
        q = one_hot(triangle3, np.array([0, 1, 2]))
        assert np.all(loss_grad_wrt_q(triangle3, q) == 0.0)

    def test_hand_expansion_single_edge(self):
        inst = make_coloring(2, [(0, 1)], k=2)
        q = np.array([[1.0, 0.0], [1.0, 0.0]])
        g = loss_grad_wrt_q(inst, q)
        # p = 1, dL/dq_0 = 2 * p * q_1 = (2, 0); symmetric for q_1.
        assert g[0].tolist() == [2.0, 0.0]
        assert g[1].tolist() == [2.0, 0.0]

    def test_triangle_matches_finite_differences(self, triangle3):
        rng = np.random.default_rng(11)
        q = rng.dirichlet(np.ones(3), size=3)
        ana = loss_grad_wrt_q(triangle3, q)
        num = numeric_grad(triangle3, q)
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
        assert np.max(np.abs(ana - num) / denom) <= 1e-4


class TestViolationScores:
    def test_feasible_assignment_zero(self, triangle3):
        assert np.all(variable_violation_scores(triangle3, np.array([0, 1, 2])) == 0.0)

    def test_hand_expansion_conflicting_pair(self):
        inst = make_coloring(2, [(0, 1)], k=3)
        v = variable_violation_scores(inst, np.array([1, 1]))
        assert v.tolist() == [2.0, 2.0]

    def test_sudoku_ranking_matches_perturbation_oracle(self):
        from nlns import parse_sudoku
        inst = parse_sudoku("." * 16)
        rng = np.random.default_rng(12)
        for _ in range(5):
            x = rng.integers(0, 4, size=16)
            v = variable_violation_scores(inst, x)
            oracle = np.abs(numeric_grad(inst, one_hot(inst, x))).sum(axis=1)
            # Scores here are exact integers; rounding the oracle to well above
            # its ~1e-9 noise floor makes ties break identically.
            assert np.allclose(v, oracle, atol=1e-6)
            assert np.array_equal(np.argsort(-v, kind="stable"),
                                  np.argsort(-oracle.round(6), kind="stable"))


class TestLossGradLogits:
    def test_zero_loss_point_zero_gradient(self):
        inst = make_coloring(2, [(0, 1)], k=2)
        z = np.array([[30.0, -30.0], [-30.0, 30.0]])  # softmax is a zero-loss point
        g = loss_grad_wrt_logits(inst, z)
        assert np.max(np.abs(g)) < 1e-12

    def test_hand_chained_value(self):
        # One free variable against a one-hot fixed neighbor, d = 2, z = (0, 0).
        inst = make_coloring(2, [(0, 1)], k=2, fixed=[False, True], given=[-1, 0])
        z = np.array([[0.0, 0.0], [40.0, -40.0]])
        g = loss_grad_wrt_logits(inst, z)
        # q_0 = (.5, .5), q_1 ~ (1, 0); p = .5; dL/dq_0 = 2p * q_1 = (1, 0)
        # softmax chain: q_0 * (dq - <dq, q_0>) = (.5*(1-.5), .5*(0-.5)) = (.25, -.25)
        assert g[0] == pytest.approx([0.25, -0.25], abs=1e-10)

    def test_random_instances_match_finite_differences(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            inst = random_instance(rng)
            z = rng.normal(0, 1.5, size=(inst.n, inst.domain_size))
            ana = loss_grad_wrt_logits(inst, z)
            num = numeric_grad(inst, z, space="logits")
            denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
            assert np.max(np.abs(ana - num) / denom) <= 1e-4

    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            inst = random_instance(rng)
            z = rng.normal(0, 2.0, size=(inst.n, inst.domain_size))
            g = loss_grad_wrt_logits(inst, z)
            assert np.max(np.abs(g.sum(axis=1))) < 1e-10


class TestScaleEquivariance:
    def test_doubling_weights_doubles_gradients(self):
        rng = np.random.default_rng(15)
        edges = [(0, 1), (1, 2), (0, 2), (2, 3)]
        base = make_coloring(4, edges, k=3)
        doubled = CspInstance(
            ProblemKind.GRAPH_COLORING, base.domain,
            tuple(Constraint(c.kind, c.scope, 2.0 * c.weight) for c in base.constraints),
            base.fixed, base.given_values)
        q = rng.dirichlet(np.ones(3), size=4)
        assert np.array_equal(2.0 * loss_grad_wrt_q(base, q), loss_grad_wrt_q(doubled, q))
        z = rng.normal(size=(4, 3))
        assert np.array_equal(2.0 * loss_grad_wrt_logits(base, z),
                              loss_grad_wrt_logits(doubled, z))


class TestFiniteDiffCheck:
    def test_zero_loss_region(self, triangle3):
        q = one_hot(triangle3, np.array([0, 1, 2]))
        assert finite_diff_check(triangle3, q, 1e-5, space="q") == 0.0

    def test_random_points_within_tolerance(self):
        rng = np.random.default_rng(16)
        for _ in range(8):
            inst = random_instance(rng)
            q = rng.dirichlet(np.ones(inst.domain_size), size=inst.n)
            assert finite_diff_check(inst, q, 1e-5, space="q") <= 1e-4
            z = rng.normal(0, 1.5, size=(inst.n, inst.domain_size))
            assert finite_diff_check(inst, z, 1e-5, space="logits") <= 1e-4

    def test_detects_corrupted_gradient(self, triangle2, monkeypatch):
        import nlns.gradients as gradients
        true_fn = gradients.loss_grad_wrt_q.__wrapped__ if hasattr(
            gradients.loss_grad_wrt_q, "__wrapped__") else gradients.loss_grad_wrt_q

        def corrupted(instance, q):
            g = true_fn(instance, q)
            g = g.copy()
            g[0, 0] += 0.1
            return g

        monkeypatch.setattr(gradients, "loss_grad_wrt_q", corrupted)
        rng = np.random.default_rng(17)
        q = rng.dirichlet(np.ones(2), size=3)
        assert gradients.finite_diff_check(triangle2, q, 1e-5, space="q") > 1e-2

    def test_invalid_step_rejected(self, triangle2):
        with pytest.raises(ValueError):
            finite_diff_check(triangle2, np.zeros((3, 2)), h=0.0)
