"""Render benchmark reports to PNG files (headless)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchmarkReport  # noqa: E402


def _save(fig, out_dir: Path, name: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_series(report: BenchmarkReport, out_dir, xlabel: str) -> Path:
    """Mean with min/max whiskers against a numeric parameter."""
    xs = [float(s.parameter) for s in report.samples]
    means = [s.mean_ms for s in report.samples]
    lo = [s.mean_ms - s.min_ms for s in report.samples]
    hi = [s.max_ms - s.mean_ms for s in report.samples]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(xs, means, yerr=[lo, hi], marker="o", capsize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("time per call (ms)")
    ax.set_title(report.scenario)
    ax.grid(alpha=0.3)
    return _save(fig, Path(out_dir), report.scenario)


def plot_aspect_vs_inline(report: BenchmarkReport, out_dir) -> Path:
    """One panel per complexity level; aspect and inline means against rule count."""
    series: dict[str, dict[str, list[tuple[int, float]]]] = {}
    for s in report.samples:
        path, level, rules = s.parameter.split(":")
        series.setdefault(level, {}).setdefault(path, []).append((int(rules[1:]), s.mean_ms))
    levels = sorted(series, key=lambda l: int(l[1:]))
    fig, axes = plt.subplots(1, len(levels), figsize=(4 * len(levels), 3.5), squeeze=False)
    for ax, level in zip(axes[0], levels):
        for path, pts in sorted(series[level].items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=path)
        ax.set_title(f"complexity {level[1:]}")
        ax.set_xlabel("rules")
        ax.set_ylabel("time per activation (ms)")
        ax.grid(alpha=0.3)
        ax.legend()
    return _save(fig, Path(out_dir), report.scenario)


def plot_report(report: BenchmarkReport, out_dir) -> Path:
    if report.scenario == "aspect-vs-inline":
        return plot_aspect_vs_inline(report, out_dir)
    xlabel = "exchanged variables" if report.scenario == "aspect-empty" else "providers"
    return plot_series(report, out_dir, xlabel)
