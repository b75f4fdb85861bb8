"""Matplotlib renderings of the CLI reports.

Every function writes a single PNG next to the delimited report output.
The module forces the non-interactive Agg backend so rendering works in
headless environments; callers import it lazily (only when figures were
requested) to keep matplotlib out of the default import path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import EvalSummary, SweepResult

__all__ = ["render_eval", "render_sweep", "render_bench", "render_compare"]


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_eval(summary: EvalSummary, path: str) -> None:
    """Bar chart of the twelve summary metrics; -1 sentinels are omitted."""
    items = [(name, value) for name, value in summary.items() if value >= 0.0]
    fig, ax = plt.subplots(figsize=(8, 4))
    names = [name for name, _ in items]
    values = [value for _, value in items]
    ax.bar(range(len(items)), values, color="#4878cf")
    ax.set_xticks(range(len(items)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("value")
    ax.set_title("evaluation summary")
    _save(fig, path)


def render_sweep(result: SweepResult, path: str) -> None:
    """AP versus threshold with the stability band shaded."""
    xs = [p.threshold for p in result.points]
    ys = [p.summary.ap for p in result.points]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, ys, marker="o", color="#4878cf")
    lo, hi = result.band
    ax.axvspan(lo, hi, color="#4878cf", alpha=0.12)
    ax.set_xlabel("threshold")
    ax.set_ylabel("AP@0.5:0.95")
    title = "threshold sweep"
    if result.band_stability is not None:
        title += f" (band spread {result.band_stability:.4f})"
    ax.set_title(title)
    _save(fig, path)


def render_bench(
    rows: dict[str, list[tuple[int, float]]],
    exponents: dict[str, float | None],
    path: str,
) -> None:
    """Log-log runtime scaling per algorithm with fitted exponents."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, pairs in rows.items():
        ns = [n for n, _ in pairs]
        ts = [t for _, t in pairs]
        exp = exponents.get(name)
        label = name if exp is None else f"{name} (exp {exp:.2f})"
        ax.loglog(ns, ts, marker="o", label=label)
    ax.set_xlabel("detections per image")
    ax.set_ylabel("median seconds")
    ax.set_title("runtime scaling")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_compare(labels: list[str], summaries: list[EvalSummary], path: str) -> None:
    """Grouped bars: one cluster per metric, one bar per configuration."""
    metric_names = [name for name, _ in summaries[0].items()]
    fig, ax = plt.subplots(figsize=(10, 4.5))
    width = 0.8 / max(1, len(labels))
    for i, (label, summary) in enumerate(zip(labels, summaries)):
        values = [max(0.0, value) for _, value in summary.items()]
        offsets = [j + i * width for j in range(len(metric_names))]
        ax.bar(offsets, values, width=width, label=label)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(metric_names))])
    ax.set_xticklabels(metric_names, rotation=45, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("value")
    ax.set_title("configuration comparison")
    ax.legend(fontsize=8)
    _save(fig, path)
