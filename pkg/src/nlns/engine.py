"""The outer LNS loop: initialize, then destroy / forward / repair to budget.

Every proposal is accepted as the next state; the best assignment seen so
far (the incumbent) is tracked separately, so the reported best cost is
non-increasing even when the walk moves uphill. Prediction-guided destroy
operators consume the logits produced by the previous iteration's forward
pass; iteration 0 has none and falls back to random removal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .csp import CspInstance, ProblemKind, assignment_report
from .destroy import DestroyContext, get_destroy_operator
from .errors import ConfigError
from .model import RepairModel, forward, hyper_for_instance, init_model
from .repair import get_repair_operator, repair_greedy, repair_sample


@dataclass
class LnsConfig:
    """One solver run's settings; the seed fixes all stochastic behavior."""

    destroy_id: str = "random"
    repair_id: str = "sample"
    rate: float = 0.3
    max_iterations: int | None = None
    time_limit: float | None = None
    tau: float = 1.0
    seed: int = 0
    stop_on_feasible: bool = True

    def __post_init__(self):
        if not 0 < self.rate <= 1:
            raise ConfigError(f"destruction rate must be in (0, 1], got {self.rate}")
        if self.max_iterations is None and self.time_limit is None:
            raise ConfigError("set max_iterations and/or time_limit")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")


@dataclass
class RunRecord:
    """Trajectory of one run. Index 0 is the initial state, then one entry
    per executed iteration. Timing fields are excluded from reproducibility
    comparisons."""

    costs: list[int] = field(default_factory=list)
    best_costs: list[int] = field(default_factory=list)
    cell_accuracy: list[float] | None = None
    cut_sizes: list[int] | None = None
    iter_ms: list[float] = field(default_factory=list)
    best_assignment: np.ndarray | None = None
    final_assignment: np.ndarray | None = None
    iterations: int = 0
    solved: bool = False
    instance_name: str = ""

    @property
    def best_cost(self) -> int:
        return self.best_costs[-1]

    def semantic_fields(self) -> tuple:
        """Everything that a fixed seed must reproduce (timings excluded)."""
        return (
            tuple(self.costs),
            tuple(self.best_costs),
            None if self.cell_accuracy is None else tuple(self.cell_accuracy),
            None if self.cut_sizes is None else tuple(self.cut_sizes),
            tuple(self.best_assignment.tolist()),
            tuple(self.final_assignment.tolist()),
            self.iterations,
            self.solved,
        )


def initialize(instance: CspInstance, rng: np.random.Generator) -> np.ndarray:
    """Givens at their fixed values, every free variable uniform at random."""
    x = instance.given_values.copy()
    free = instance.free_indices
    x[free] = rng.integers(0, instance.domain_size, size=free.size)
    return x


def _record_state(record: RunRecord, instance: CspInstance, x, c, best_cost, ms):
    record.costs.append(int(c))
    record.best_costs.append(int(best_cost))
    record.iter_ms.append(float(ms))
    if record.cell_accuracy is not None:
        record.cell_accuracy.append(float(np.mean(x == instance.ground_truth)))
    if record.cut_sizes is not None:
        record.cut_sizes.append(instance.n_constraints - int(c))


def lns_run(instance: CspInstance, model: RepairModel, cfg: LnsConfig) -> RunRecord:
    """Run the destroy / forward / repair loop until feasible or out of budget."""
    destroy_fn = get_destroy_operator(cfg.destroy_id)
    repair_fn = get_repair_operator(cfg.repair_id)
    rng = np.random.default_rng(cfg.seed)

    record = RunRecord(instance_name=instance.name)
    if instance.ground_truth is not None:
        record.cell_accuracy = []
    if instance.problem_kind is ProblemKind.MAXCUT:
        record.cut_sizes = []

    x = initialize(instance, rng)
    report = assignment_report(instance, x)
    best_x, best_cost = x, report.violated_count
    _record_state(record, instance, x, report.violated_count, best_cost, 0.0)

    logits = None
    start = time.perf_counter()
    it = 0
    while True:
        if cfg.stop_on_feasible and best_cost == 0:
            break
        if cfg.max_iterations is not None and it >= cfg.max_iterations:
            break
        if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
            break
        t0 = time.perf_counter()
        ctx = DestroyContext(instance, x, cfg.rate, rng, logits=logits, penalties=report)
        mask = destroy_fn(ctx)
        z = forward(model, instance, x, mask)
        if repair_fn is repair_sample:
            proposal = repair_sample(z, mask, x, cfg.tau, rng, fixed=instance.fixed)
        else:
            proposal = repair_greedy(z, mask, x, fixed=instance.fixed)
        x, logits = proposal.x_next, z
        report = assignment_report(instance, x)
        c = report.violated_count
        if c < best_cost:
            best_cost, best_x = c, x
        it += 1
        _record_state(record, instance, x, c, best_cost,
                      (time.perf_counter() - t0) * 1000.0)

    record.iterations = it
    record.best_assignment = best_x
    record.final_assignment = x
    record.solved = best_cost == 0
    return record


def lns_run_untrained_baseline(instance: CspInstance, cfg: LnsConfig,
                               hyper=None) -> RunRecord:
    """Same loop with a freshly initialized model; a trainability control."""
    if hyper is None:
        hyper = hyper_for_instance(instance, n_max=max(instance.n, 16))
    model = init_model(hyper, seed=cfg.seed)
    return lns_run(instance, model, cfg)
