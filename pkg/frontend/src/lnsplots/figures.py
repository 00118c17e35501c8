"""Figure builders: solved-percentage curves, accuracy bands, split violins.

Each builder writes an image and returns the numeric series it drew, so
callers and tests can check the plotted values without re-parsing the image.
Rendering uses the Agg backend; identical inputs produce identical pixels.
"""

from __future__ import annotations

import warnings

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .frames import TraceFormatError, forward_fill_to

_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"]


def _solve_iteration(group: pd.DataFrame):
    solved = group.loc[group["best_cost"] == 0, "iter"]
    return int(solved.min()) if len(solved) else None


def cumulative_solved(df: pd.DataFrame) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per config: (iterations, cumulative percent of instances solved)."""
    horizon = int(df["iter"].max())
    curves = {}
    for config, group in df.groupby("config", sort=False):
        firsts = [
            _solve_iteration(g) for _, g in group.groupby("instance", sort=False)
        ]
        count = len(firsts)
        iters = np.arange(horizon + 1)
        pct = np.array([
            100.0 * sum(1 for f in firsts if f is not None and f <= t) / count
            for t in iters
        ])
        curves[config] = (iters, pct)
    return curves


def plot_solved_curve(df: pd.DataFrame, out) -> dict:
    """Solved-percentage-over-iterations line chart, one line per config."""
    if df.empty:
        raise TraceFormatError("empty trace frame")
    curves = cumulative_solved(df)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for color, (config, (iters, pct)) in zip(_COLORS * 3, curves.items()):
        ax.plot(iters, pct, label=config, color=color)
    ax.set_xlabel("iteration")
    ax.set_ylabel("instances solved (%)")
    ax.set_ylim(-2, 102)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return {"curves": curves}


def accuracy_bands(df: pd.DataFrame) -> dict[str, pd.DataFrame]:
    if "cell_accuracy" not in df.columns or df["cell_accuracy"].isna().all():
        raise TraceFormatError("trace has no cell_accuracy column")
    horizon = int(df["iter"].max())
    filled = forward_fill_to(df, horizon)
    bands = {}
    for config, group in filled.groupby("config", sort=False):
        stats = group.groupby("iter")["cell_accuracy"].agg(
            mean="mean",
            q25=lambda s: s.quantile(0.25),
            q75=lambda s: s.quantile(0.75),
        ).reset_index()
        bands[config] = stats
    return bands


def plot_accuracy_curve(df: pd.DataFrame, out) -> dict:
    """Mean accuracy per iteration per config with an interquartile band."""
    bands = accuracy_bands(df)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for color, (config, stats) in zip(_COLORS * 3, bands.items()):
        ax.plot(stats["iter"], stats["mean"], label=config, color=color)
        ax.fill_between(stats["iter"], stats["q25"], stats["q75"],
                        color=color, alpha=0.2, linewidth=0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cell accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return {"bands": bands}


def _clip_violin_half(body, center: float, side: str) -> None:
    verts = body.get_paths()[0].vertices
    if side == "left":
        verts[:, 0] = np.minimum(verts[:, 0], center)
    else:
        verts[:, 0] = np.maximum(verts[:, 0], center)


def constraint_satisfaction_at(df: pd.DataFrame, aggregate: pd.DataFrame,
                               step: int) -> dict[str, np.ndarray]:
    """Per config: per-instance fraction of satisfied constraints at a step.

    Instances whose runs ended earlier contribute their final state. The
    constraint count comes from the aggregate rows by instance name alone,
    so trace labels need not match the aggregate's config ids.
    """
    sizes = (aggregate.drop_duplicates("instance")
             .set_index("instance")["n_constraints"])
    values = {}
    for config, group in df.groupby("config", sort=False):
        per_instance = []
        for instance, g in group.groupby("instance", sort=False):
            g = g.sort_values("iter")
            eligible = g[g["iter"] <= step]
            row = eligible.iloc[-1] if len(eligible) else g.iloc[0]
            if instance not in sizes.index:
                raise TraceFormatError(
                    f"aggregate file has no row for instance {instance!r}")
            per_instance.append(1.0 - row["cost"] / sizes.loc[instance])
        values[config] = np.array(per_instance)
    return values


def plot_violin_cumulative(df: pd.DataFrame, steps: list[int], out,
                           aggregate: pd.DataFrame) -> dict:
    """Split-violin satisfaction distributions plus cumulative solved lines.

    Exactly two configurations are required; the first fills the left half
    of each violin, the second the right. The right axis overlays each
    config's cumulative solved percentage over all iterations.
    """
    configs = list(dict.fromkeys(df["config"]))
    if len(configs) != 2:
        raise TraceFormatError(f"split violins need exactly 2 configs, got {len(configs)}")
    horizon = int(df["iter"].max())
    clamped = []
    for s in steps:
        if s > horizon:
            warnings.warn(f"step {s} beyond trace length {horizon}; clamped")
            s = horizon
        clamped.append(int(s))

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax2 = ax.twinx()
    dists: dict[str, list[np.ndarray]] = {c: [] for c in configs}
    positions = np.arange(1, len(clamped) + 1)
    for pos, step in zip(positions, clamped):
        values = constraint_satisfaction_at(df, aggregate, step)
        for config, side, color in zip(configs, ("left", "right"), _COLORS):
            data = values[config]
            dists[config].append(data)
            parts = ax.violinplot([data], positions=[pos], widths=0.8,
                                  showextrema=False)
            for body in parts["bodies"]:
                _clip_violin_half(body, pos, side)
                body.set_facecolor(color)
                body.set_alpha(0.6)
    curves = cumulative_solved(df)
    endpoints = {}
    for config, color in zip(configs, _COLORS):
        iters, pct = curves[config]
        # map iteration axis onto violin positions
        xs = 1 + (len(clamped) - 1) * iters / max(horizon, 1)
        ax2.plot(xs, pct, color=color, linestyle="--", label=f"{config} solved")
        endpoints[config] = float(pct[-1])
    ax.set_xticks(positions)
    ax.set_xticklabels([f"step {s}" for s in clamped])
    ax.set_ylabel("constraint satisfaction")
    ax2.set_ylabel("cumulative solved (%)")
    ax2.set_ylim(-2, 102)
    handles = [plt.Line2D([], [], color=c, label=cfg)
               for cfg, c in zip(configs, _COLORS)]
    ax.legend(handles=handles, loc="lower right")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return {"steps": clamped, "distributions": dists,
            "cumulative": curves, "endpoints": endpoints}
