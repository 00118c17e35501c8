"""Command-line interface: gen, train, solve, and bench subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .csp import ProblemKind
from .engine import LnsConfig, lns_run
from .errors import ConfigError, ModelFormatError, NlnsError, ParseError
from .instances import (DatasetSpec, gen_dataset, load_dataset, load_instance_file,
                        read_manifest)
from .model import ModelHyper, TrainConfig, init_model, load_model, save_model, train

_TRAIN_KINDS = {
    "sudoku4": ProblemKind.SUDOKU,
    "sudoku9": ProblemKind.SUDOKU,
    "coloring": ProblemKind.GRAPH_COLORING,
    "maxcut": ProblemKind.MAXCUT,
}


def _cmd_gen(args) -> int:
    spec = DatasetSpec(kind=args.kind, count=args.count, seed=args.seed,
                       n=args.n, p=args.p, k=args.k, givens=args.givens,
                       givens_max=args.givens_max)
    files = gen_dataset(spec, args.out)
    print(f"wrote {len(files)} file(s) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    problem = _TRAIN_KINDS[args.kind]
    manifest = read_manifest(args.data)
    if args.kind in ("sudoku4", "sudoku9") and manifest.kind != args.kind:
        raise ConfigError(f"dataset kind {manifest.kind!r} does not match --kind {args.kind}")
    k = args.k if args.k is not None else manifest.k
    dataset = load_dataset(args.data, problem=problem, k=k)
    if not dataset:
        raise ConfigError(f"no instances found in {args.data}")
    hyper = ModelHyper(
        domain_size=dataset[0].domain_size,
        kind=problem,
        n_layers=args.layers,
        width=args.width,
        n_heads=args.heads,
        n_max=args.n_max if args.n_max is not None else max(inst.n for inst in dataset),
        use_conflict=problem is not ProblemKind.SUDOKU,
    )
    model = init_model(hyper, seed=args.seed)
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch, steps=args.steps,
                      tau=args.tau, destroy_rate=args.rho, seed=args.seed)

    window: list[float] = []

    def progress(step, loss):
        window.append(loss)
        if (step + 1) % 100 == 0:
            print(f"step {step + 1}/{cfg.steps} loss {np.mean(window[-100:]):.5f}",
                  file=sys.stderr)

    train(model, dataset, cfg, callback=progress)
    save_model(model, args.out)
    print(f"trained {cfg.steps} steps on {len(dataset)} instances -> {args.out}")
    return 0


def _cmd_solve(args) -> int:
    model = load_model(args.model)
    instance = load_instance_file(args.instance, problem=model.hyper.kind,
                                  k=model.hyper.domain_size)
    cfg = LnsConfig(destroy_id=args.destroy, repair_id=args.repair, rate=args.rho,
                    max_iterations=args.iters, time_limit=args.time_limit,
                    tau=args.tau, seed=args.seed)
    record = lns_run(instance, model, cfg)
    print(f"instance {instance.name or args.instance}: "
          f"solved={record.solved} best_cost={record.best_cost} "
          f"iterations={record.iterations}")
    if record.cut_sizes is not None:
        print(f"best cut: {max(record.cut_sizes)} / {instance.n_constraints} edges")
    if args.trace:
        result = bench_mod.BenchmarkResult(cfg, [record], [instance],
                                           bench_mod.compute_metrics([record]))
        bench_mod.write_trace_csv(result, args.trace)
    return 0


def _cmd_bench(args) -> int:
    model = load_model(args.model)
    instances = load_dataset(args.data, problem=model.hyper.kind,
                             k=model.hyper.domain_size)
    if not instances:
        bench_mod.warn("dataset is empty; writing empty results")
    references = bench_mod.parse_refs(args.refs) if args.refs else None
    cfg = LnsConfig(destroy_id=args.destroy, repair_id=args.repair, rate=args.rho,
                    max_iterations=args.iters, time_limit=args.time_limit,
                    seed=args.seed)
    result = bench_mod.run_benchmark(instances, model, cfg, references=references,
                                     workers=args.workers)
    if args.out_csv:
        bench_mod.write_aggregate_csv(result, args.out_csv)
    if args.out_json:
        bench_mod.write_json(result, args.out_json)
    if args.out_trace:
        bench_mod.write_trace_csv(result, args.out_trace)
    m = result.metrics
    if m["count"]:
        print(f"{m['count']} instances: solved {100 * m['solved_fraction']:.1f}%, "
              f"mean best cost {m['mean_best_cost']:.3f}")
    else:
        print("0 instances")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlns",
        description="Large neighborhood search with a neural repair operator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance dataset")
    p.add_argument("--kind", required=True, choices=["sudoku4", "sudoku9", "graph"])
    p.add_argument("--n", type=int, default=50, help="graph vertex count")
    p.add_argument("--p", type=float, default=0.1, help="graph edge probability")
    p.add_argument("--k", type=int, default=5, help="suggested color count")
    p.add_argument("--givens", type=int, default=8, help="sudoku givens per instance")
    p.add_argument("--givens-max", type=int, default=None,
                   help="draw givens uniformly from [--givens, --givens-max]")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a repair model on a dataset")
    p.add_argument("--kind", required=True, choices=sorted(_TRAIN_KINDS))
    p.add_argument("--data", required=True)
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None, help="colors for coloring datasets")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("solve", help="solve a single instance")
    p.add_argument("--model", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--destroy", default="random")
    p.add_argument("--repair", default="sample")
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="write per-iteration CSV here")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", help="run a dataset and write aggregate results")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--destroy", default="random")
    p.add_argument("--repair", default="sample")
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refs", default=None, help="best-known cuts: 'name cut' lines")
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-trace", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NlnsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
