"""Figure rendering for run traces.

Reads the plot-ready trace CSV a run emits and writes PNG files next to
it: objective trajectory, per-class SLIs against their SLO thresholds,
and knob trajectories. Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ScenarioConfig, read_trace_csv

plt.rcParams.update({
    "figure.figsize": (7.0, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
})

CLASS_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c")


def _phase_marks(ax, scenario: ScenarioConfig, n: int):
    for p in scenario.phases[1:]:
        if p.start < n:
            ax.axvline(p.start, color="gray", linestyle=":", linewidth=1)


def render_objective(rows, scenario, path: Path) -> Path:
    it = [r["iteration"] for r in rows]
    fig, ax = plt.subplots()
    ax.plot(it, [r["g"] for r in rows], label="g (system)", color="#1f77b4")
    ax.plot(it, [r["g_best"] for r in rows], label="rolling best",
            color="#1f77b4", linestyle="--", alpha=0.7)
    fs = np.array([r["f"] for r in rows])
    if np.any(np.isfinite(fs)):
        ax.plot(it, fs, label="f (model)", color="#ff7f0e", alpha=0.7)
    shifts = [r["iteration"] for r in rows if r["regime_shift"] > 0]
    for s in shifts:
        ax.axvline(s, color="red", alpha=0.3, linewidth=1)
    _phase_marks(ax, scenario, len(rows))
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective J")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_slis(rows, scenario, path: Path) -> Path:
    cls = scenario.slo.labels or tuple(range(scenario.slo.n_classes))
    it = [r["iteration"] for r in rows]
    fig, ax = plt.subplots()
    for i, (c, v) in enumerate(zip(cls, scenario.slo.thresholds)):
        color = CLASS_COLORS[i % len(CLASS_COLORS)]
        ax.plot(it, [r[f"raw_d{c}"] for r in rows], color=color, alpha=0.25)
        ax.plot(it, [r[f"smoothed_d{c}"] for r in rows], color=color,
                label=f"DSCP {c}")
        ax.axhline(v, color=color, linestyle="--", linewidth=1, alpha=0.8)
    _phase_marks(ax, scenario, len(rows))
    ax.set_xlabel("iteration")
    ax.set_ylabel("p99 FCT slowdown")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_knobs(rows, scenario, path: Path) -> Path:
    labels = scenario.space.labels
    it = [r["iteration"] for r in rows]
    groups: dict[str, list[str]] = {}
    for l in labels:
        prefix = l.rsplit("_", 1)[0] if "_" in l else l
        groups.setdefault(prefix, []).append(l)
    fig, axes = plt.subplots(len(groups), 1, sharex=True,
                             figsize=(7.0, 2.2 * len(groups)))
    if len(groups) == 1:
        axes = [axes]
    for ax, (prefix, ls) in zip(axes, groups.items()):
        for i, l in enumerate(ls):
            ax.plot(it, [r[f"x_{l}"] for r in rows],
                    color=CLASS_COLORS[i % len(CLASS_COLORS)], label=l)
        _phase_marks(ax, scenario, len(rows))
        ax.set_ylabel(prefix)
        ax.legend(loc="upper right")
    axes[-1].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_steps(rows, scenario, path: Path) -> Path:
    it = [r["iteration"] for r in rows]
    fig, ax = plt.subplots()
    ax.plot(it, [r["dist_to_best"] for r in rows], label="proposal distance",
            color="#2ca02c")
    eis = np.array([r["ei"] for r in rows])
    if np.any(np.isfinite(eis)):
        ax2 = ax.twinx()
        ax2.plot(it, eis, label="EI", color="#9467bd", alpha=0.6)
        ax2.set_ylabel("expected improvement")
        ax2.grid(False)
    _phase_marks(ax, scenario, len(rows))
    ax.set_xlabel("iteration")
    ax.set_ylabel("mixed distance to incumbent")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_run(trace_path, scenario: ScenarioConfig, out_dir=None) -> list[Path]:
    """Render all figures for one trace; returns the written paths."""
    trace_path = Path(trace_path)
    out = Path(out_dir) if out_dir is not None else trace_path.parent
    out.mkdir(parents=True, exist_ok=True)
    _, rows = read_trace_csv(trace_path)
    stem = trace_path.name.replace("_trace.csv", "")
    return [
        render_objective(rows, scenario, out / f"{stem}_objective.png"),
        render_slis(rows, scenario, out / f"{stem}_slis.png"),
        render_knobs(rows, scenario, out / f"{stem}_knobs.png"),
        render_steps(rows, scenario, out / f"{stem}_steps.png"),
    ]
