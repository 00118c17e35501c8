"""Benchmark driver: many seeded runs, aggregate metrics, CSV/JSON output.

Instances run independently (optionally in parallel processes); instance i
uses the derived seed ``cfg.seed XOR i`` so results are reproducible under
any worker count. Data rows carry no wall-clock fields, so reruns of the
same configuration produce byte-identical aggregate CSVs.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .csp import CspInstance
from .engine import LnsConfig, RunRecord, lns_run
from .errors import ConfigError
from .model import RepairModel


@dataclass
class BenchmarkResult:
    config: LnsConfig
    records: list[RunRecord]
    instances: list[CspInstance]
    metrics: dict
    references: dict | None = None


def parse_refs(path) -> dict[str, int]:
    """Best-known-cut reference file: 'instance_name best_cut' per line."""
    refs = {}
    for line in Path(path).read_text().splitlines():
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 2:
            raise ConfigError(f"malformed reference line: {line!r}")
        refs[fields[0]] = int(fields[1])
    return refs


def compute_metrics(records: list[RunRecord], references: dict[str, int] | None = None) -> dict:
    """Aggregate solved fraction, cost stats, and optional accuracy/gap means."""
    if not records:
        return {"count": 0, "solved_fraction": None, "mean_best_cost": None,
                "median_best_cost": None}
    best = np.array([r.best_cost for r in records], dtype=np.float64)
    metrics = {
        "count": len(records),
        "solved_fraction": float(np.mean([r.solved for r in records])),
        "mean_best_cost": float(best.mean()),
        "median_best_cost": float(np.median(best)),
    }
    accs = [r.cell_accuracy[-1] for r in records if r.cell_accuracy is not None]
    if accs:
        metrics["mean_cell_accuracy"] = float(np.mean(accs))
    if references is not None:
        gaps = []
        for r in records:
            if r.cut_sizes is None:
                continue
            if r.instance_name not in references:
                raise ConfigError(f"no best-known reference for instance {r.instance_name!r}")
            gaps.append(references[r.instance_name] - max(r.cut_sizes))
        if gaps:
            metrics["mean_cut_gap"] = float(np.mean(gaps))
    return metrics


def _run_one(args):
    idx, instance, model, cfg = args
    return idx, lns_run(instance, model, replace(cfg, seed=cfg.seed ^ idx))


def run_benchmark(instances: list[CspInstance], model: RepairModel, cfg: LnsConfig,
                  references: dict[str, int] | None = None,
                  workers: int = 1) -> BenchmarkResult:
    """Run every instance under derived per-instance seeds and aggregate."""
    jobs = [(i, inst, model, cfg) for i, inst in enumerate(instances)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda pair: pair[0])
    records = [rec for _, rec in results]
    return BenchmarkResult(
        config=cfg,
        records=records,
        instances=list(instances),
        metrics=compute_metrics(records, references),
        references=references,
    )


def config_id(cfg: LnsConfig) -> str:
    return f"{cfg.destroy_id}+{cfg.repair_id}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_aggregate_csv(result: BenchmarkResult, path) -> None:
    """One row per instance with final metrics; no timing columns."""
    cid = config_id(result.config)
    refs = result.references or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "config", "instance", "kind", "n_vars", "n_constraints", "iterations",
            "solved", "best_cost", "final_cost", "cell_accuracy", "cut_size",
            "best_known_cut", "cut_gap",
        ])
        for inst, rec in zip(result.instances, result.records):
            best_cut = max(rec.cut_sizes) if rec.cut_sizes is not None else None
            known = refs.get(rec.instance_name)
            writer.writerow([
                cid, rec.instance_name, inst.problem_kind.value, inst.n,
                inst.n_constraints, rec.iterations,
                _fmt(rec.solved), rec.best_cost, rec.costs[-1],
                _fmt(rec.cell_accuracy[-1] if rec.cell_accuracy is not None else None),
                _fmt(best_cut), _fmt(known),
                _fmt(known - best_cut if known is not None and best_cut is not None else None),
            ])


def write_trace_csv(result: BenchmarkResult, path) -> None:
    """One row per (instance, iteration); iteration 0 is the initial state."""
    has_acc = any(r.cell_accuracy is not None for r in result.records)
    has_cut = any(r.cut_sizes is not None for r in result.records)
    header = ["instance", "iter", "cost", "best_cost"]
    if has_acc:
        header.append("cell_accuracy")
    if has_cut:
        header.append("cut_size")
    header.append("elapsed_ms")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in result.records:
            for t in range(len(rec.costs)):
                row = [rec.instance_name, t, rec.costs[t], rec.best_costs[t]]
                if has_acc:
                    row.append(_fmt(rec.cell_accuracy[t]) if rec.cell_accuracy is not None else "")
                if has_cut:
                    row.append(rec.cut_sizes[t] if rec.cut_sizes is not None else "")
                row.append(f"{rec.iter_ms[t]:.3f}")
                writer.writerow(row)


def write_json(result: BenchmarkResult, path) -> None:
    payload = {
        "config": asdict(result.config),
        "config_id": config_id(result.config),
        "metrics": result.metrics,
        "metadata": {
            "cell_accuracy_basis": "all cells; givens count as correct",
            "per_instance_seed": "top seed XOR instance index",
        },
        "instances": [
            {
                "name": rec.instance_name,
                "seed": result.config.seed ^ i,
                "iterations": rec.iterations,
                "solved": rec.solved,
                "best_cost": rec.best_cost,
            }
            for i, rec in enumerate(result.records)
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)
