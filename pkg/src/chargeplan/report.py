"""Figure rendering for experiment results.

Reads the rows emitted by the harness and writes matplotlib figures next
to the delimited output: mission success rates and solution quality per
scenario cell, and the confidence-sweep tradeoff when available.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_BAR_KW = {"edgecolor": "black", "linewidth": 0.4}


def _cell_label(row) -> str:
    return f"{row['delta_mu'] * 100:+.0f}/{row['delta_sigma'] * 100:+.0f}"


def _grouped_bars(ax, rows, value_key, ylabel):
    planners = sorted({r["planner"] for r in rows})
    cells = sorted({(r["delta_mu"], r["delta_sigma"]) for r in rows})
    width = 0.8 / max(len(planners), 1)
    for i, planner in enumerate(planners):
        by_cell = {(r["delta_mu"], r["delta_sigma"]): r[value_key]
                   for r in rows if r["planner"] == planner}
        xs = [c + (i - (len(planners) - 1) / 2) * width for c in range(len(cells))]
        ys = [by_cell.get(cell) for cell in cells]
        ys = [0.0 if y is None else y for y in ys]
        ax.bar(xs, ys, width=width, label=planner, **_BAR_KW)
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels(
        [f"{mu * 100:+.0f}/{sd * 100:+.0f}" for mu, sd in cells],
        rotation=60, fontsize=7)
    ax.set_xlabel("shift/scale of truth (%)")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)


def _per_instance_figure(rows, value_key, ylabel, title):
    instances = sorted({r["instance"] for r in rows})
    fig, axes = plt.subplots(len(instances), 1,
                             figsize=(8, 2.8 * len(instances)), squeeze=False)
    for ax, inst in zip(axes[:, 0], instances):
        _grouped_bars(ax, [r for r in rows if r["instance"] == inst], value_key, ylabel)
        ax.set_title(f"{title} - {inst}", fontsize=9)
    fig.tight_layout()
    return fig


def render_report(metrics_rows: Sequence[dict], out_dir,
                  sweep_rows: Sequence[dict] | None = None) -> list[Path]:
    """Render the standard result figures; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    fig = _per_instance_figure(metrics_rows, "msr", "mission success rate",
                               "Mission success rate")
    path = out / "msr.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    quality = [r for r in metrics_rows if r["p_star_mean"] is not None]
    if quality:
        fig = _per_instance_figure(quality, "p_star_mean", "mean collected prize (kJ)",
                                   "Collected prize over successes")
        path = out / "prize.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    if sweep_rows:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        thetas = sorted({r["theta_min"] for r in sweep_rows})
        cells = sorted({(r["instance"], r["delta_mu"], r["delta_sigma"])
                        for r in sweep_rows})
        for inst, dmu, dsig in cells:
            sel = {r["theta_min"]: r for r in sweep_rows
                   if (r["instance"], r["delta_mu"], r["delta_sigma"]) == (inst, dmu, dsig)}
            label = f"{inst} {dmu * 100:+.0f}/{dsig * 100:+.0f}"
            ax1.plot(thetas, [sel[t]["msr"] if t in sel else None for t in thetas],
                     marker="o", label=label)
            ax2.plot(thetas,
                     [sel[t]["p_star_mean"] if t in sel else None for t in thetas],
                     marker="o", label=label)
        ax1.set_xlabel("minimum confidence level")
        ax1.set_ylabel("mission success rate")
        ax2.set_xlabel("minimum confidence level")
        ax2.set_ylabel("mean collected prize (kJ)")
        ax1.legend(fontsize=6)
        fig.tight_layout()
        path = out / "theta_sweep.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
