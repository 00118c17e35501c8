"""Loading and validating solver trace / aggregate CSV files.

The trace schema is one row per (instance, iteration): columns ``instance,
iter, cost, best_cost[, cell_accuracy][, cut_size], elapsed_ms``, iteration 0
being the initial state. A trace file holds one solver configuration; the
configuration label is attached as a ``config`` column on load. Aggregate
files hold one row per (config, instance) with final metrics and may mix
configurations.
"""

from __future__ import annotations

from pathlib import Path

import pandas as pd

REQUIRED_TRACE_COLUMNS = ["instance", "iter", "cost", "best_cost"]


class TraceFormatError(ValueError):
    """Trace or aggregate file violates the documented schema."""


def load_trace(path, label: str | None = None) -> pd.DataFrame:
    """Read one configuration's trace; label defaults to the file stem."""
    path = Path(path)
    df = pd.read_csv(path)
    missing = [c for c in REQUIRED_TRACE_COLUMNS if c not in df.columns]
    if missing:
        raise TraceFormatError(f"{path}: missing trace columns {missing}")
    df["config"] = label if label is not None else path.stem
    validate_trace(df)
    return df


def load_traces(specs) -> pd.DataFrame:
    """Concatenate several (label, path) pairs into one frame."""
    frames = [load_trace(path, label) for label, path in specs]
    if not frames:
        raise TraceFormatError("no trace files given")
    return pd.concat(frames, ignore_index=True)


def validate_trace(df: pd.DataFrame) -> None:
    """Iterations strictly increase and best cost never rises per instance."""
    if df.empty:
        raise TraceFormatError("trace contains no rows")
    for (config, instance), group in df.groupby(["config", "instance"], sort=False):
        iters = group["iter"].to_numpy()
        if not (iters[1:] > iters[:-1]).all():
            raise TraceFormatError(
                f"iterations not strictly increasing for {config}/{instance}")
        best = group["best_cost"].to_numpy()
        if not (best[1:] <= best[:-1]).all():
            raise TraceFormatError(
                f"best_cost increases for {config}/{instance}")


def load_aggregate(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    for col in ("config", "instance", "solved", "n_constraints"):
        if col not in df.columns:
            raise TraceFormatError(f"{path}: missing aggregate column {col!r}")
    return df


def forward_fill_to(df: pd.DataFrame, horizon: int) -> pd.DataFrame:
    """Extend each instance's last row out to ``horizon`` iterations.

    Runs stop early when solved; the assignment simply persists afterwards,
    so per-iteration statistics over many instances stay comparable.
    """
    out = []
    for (config, instance), group in df.groupby(["config", "instance"], sort=False):
        group = group.sort_values("iter")
        out.append(group)
        last = group.iloc[-1]
        last_iter = int(last["iter"])
        if last_iter < horizon:
            pad = pd.DataFrame([last] * (horizon - last_iter))
            pad["iter"] = range(last_iter + 1, horizon + 1)
            out.append(pad)
    return pd.concat(out, ignore_index=True)
