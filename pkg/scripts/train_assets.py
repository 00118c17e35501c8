#!/usr/bin/env python3
"""Build the repo's shipped artifacts: desk-scale models and sample CSVs.

Everything here is seed-deterministic. Rerunning reproduces the committed
files (timing-free CSVs byte for byte, model tensors exactly).

    python3 scripts/train_assets.py [--only sudoku|maxcut|samples]
"""

from __future__ import annotations

import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[1]

from nlns import DatasetSpec, LnsConfig, ProblemKind, gen_dataset, load_dataset, save_model
from nlns.bench import run_benchmark, write_aggregate_csv, write_trace_csv
from nlns.model import ModelHyper, TrainConfig, init_model, load_model, train

MODELS = REPO / "models"
SAMPLES = REPO / "frontend" / "sample_data"

SUDOKU4_DATA = DatasetSpec(kind="sudoku4", count=1500, seed=100, givens=8, givens_max=12)
SUDOKU4_HYPER = dict(domain_size=4, kind=ProblemKind.SUDOKU, n_layers=2, width=64,
                     n_heads=4, n_max=16, use_conflict=False)
SUDOKU4_TRAIN = TrainConfig(learning_rate=1e-3, batch_size=64, steps=3000,
                            destroy_rate=0.3, seed=0)

MAXCUT_DATA = DatasetSpec(kind="graph", count=400, seed=200, n=50, p=0.1, k=2)
MAXCUT_HYPER = dict(domain_size=2, kind=ProblemKind.MAXCUT, n_layers=2, width=64,
                    n_heads=4, n_max=128, use_conflict=True)
MAXCUT_TRAIN = TrainConfig(learning_rate=1e-3, batch_size=32, steps=1200,
                           destroy_rate=0.3, seed=0)


def _progress(tag, steps):
    def cb(step, loss):
        if (step + 1) % 200 == 0:
            print(f"[{tag}] step {step + 1}/{steps} loss {loss:.4f}", flush=True)
    return cb


def _load_spec_dataset(spec, problem=None):
    with tempfile.TemporaryDirectory() as tmp:
        gen_dataset(spec, tmp)
        return load_dataset(tmp, problem=problem)


def train_sudoku4(out_path) -> None:
    dataset = _load_spec_dataset(SUDOKU4_DATA)
    model = init_model(ModelHyper(**SUDOKU4_HYPER), seed=0)
    t0 = time.perf_counter()
    train(model, dataset, SUDOKU4_TRAIN, callback=_progress("sudoku4", SUDOKU4_TRAIN.steps))
    print(f"[sudoku4] trained in {time.perf_counter() - t0:.0f}s", flush=True)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out_path)


def train_maxcut50(out_path) -> None:
    dataset = _load_spec_dataset(MAXCUT_DATA, problem=ProblemKind.MAXCUT)
    model = init_model(ModelHyper(**MAXCUT_HYPER), seed=0)
    t0 = time.perf_counter()
    train(model, dataset, MAXCUT_TRAIN, callback=_progress("maxcut", MAXCUT_TRAIN.steps))
    print(f"[maxcut] trained in {time.perf_counter() - t0:.0f}s", flush=True)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out_path)


def make_sample_data(model_path, out_dir) -> None:
    """Two repair configurations over one suite: traces plus a merged aggregate."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    suite = _load_spec_dataset(DatasetSpec(kind="sudoku4", count=60, seed=900, givens=8))
    aggregate_chunks = []
    for repair in ("sample", "greedy"):
        cfg = LnsConfig(destroy_id="random", repair_id=repair, rate=0.3,
                        max_iterations=60, seed=42)
        result = run_benchmark(suite, model, cfg)
        write_trace_csv(result, out_dir / f"trace_random_{repair}.csv")
        agg = out_dir / f"_agg_{repair}.csv"
        write_aggregate_csv(result, agg)
        aggregate_chunks.append(agg.read_text().splitlines())
        agg.unlink()
        solved = result.metrics["solved_fraction"]
        print(f"[samples] random+{repair}: solved {100 * solved:.1f}%", flush=True)
    merged = aggregate_chunks[0] + aggregate_chunks[1][1:]
    (out_dir / "aggregate.csv").write_text("\n".join(merged) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--only", choices=["sudoku", "maxcut", "samples"], default=None)
    args = parser.parse_args(argv)
    if args.only in (None, "sudoku"):
        train_sudoku4(MODELS / "sudoku4.nlns")
    if args.only in (None, "maxcut"):
        train_maxcut50(MODELS / "maxcut50.nlns")
    if args.only in (None, "samples"):
        make_sample_data(MODELS / "sudoku4.nlns", SAMPLES)
    return 0


if __name__ == "__main__":
    sys.exit(main())
