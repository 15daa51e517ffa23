"""Static SVG charts for the report bundle, one per analytic view."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import AffinityReport, TrendSeries
from .labels import NUM_CLASSES, label_for

# Fixed palette keyed by label code so colors stay comparable across charts.
PALETTE = {
    0: "#8c564b",
    1: "#d62728",
    2: "#ff7f0e",
    3: "#7f7f7f",
    4: "#bcbd22",
    5: "#1f77b4",
    6: "#2ca02c",
}

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _new_axes(width=8.0, height=4.5):
    fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def _names() -> list[str]:
    return [label_for(code).name for code in range(NUM_CLASSES)]


def render_charts(
    charts_dir: Path,
    counts: list[int],
    series: TrendSeries,
    affinity: AffinityReport,
    january_bins: list[int],
) -> list[str]:
    """Render the four views; returns paths relative to the bundle root."""
    charts_dir = Path(charts_dir)
    charts_dir.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = "polemos"
    written: list[str] = []

    # Comment volume per category, largest first.
    fig, ax = _new_axes()
    order = sorted(range(NUM_CLASSES), key=lambda c: counts[c], reverse=True)
    ax.bar(
        [label_for(c).name for c in order],
        [counts[c] for c in order],
        color=[PALETTE[c] for c in order],
    )
    ax.set_ylabel("comments")
    ax.set_title("Comments per stance category")
    ax.tick_params(axis="x", rotation=30)
    _save(fig, charts_dir / "counts_by_category.svg")
    written.append("charts/counts_by_category.svg")

    # Fortnight trend lines, one per category.
    fig, ax = _new_axes(9.0, 5.0)
    xs = list(range(series.num_bins))
    for code in range(NUM_CLASSES):
        ax.plot(xs, series.counts[code], label=label_for(code).name, color=PALETTE[code])
    ax.set_xlabel("fortnight bin")
    ax.set_ylabel("comments")
    ax.set_title("Comment volume per category, two-week bins")
    ax.legend(fontsize=8)
    _save(fig, charts_dir / "trend_fortnight.svg")
    written.append("charts/trend_fortnight.svg")

    # January subset of the same series.
    fig, ax = _new_axes()
    jx = january_bins or xs[-1:]
    for code in range(NUM_CLASSES):
        ax.plot(
            jx,
            [series.counts[code][b] for b in jx],
            marker="o",
            label=label_for(code).name,
            color=PALETTE[code],
        )
    ax.set_xlabel("fortnight bin")
    ax.set_ylabel("comments")
    ax.set_title("Comment volume per category, January window")
    ax.legend(fontsize=8)
    _save(fig, charts_dir / "trend_january.svg")
    written.append("charts/trend_january.svg")

    # Mean likes per category.
    fig, ax = _new_axes()
    means = []
    for code in range(NUM_CLASSES):
        mean = affinity.per_label[code].mean_likes
        means.append(float(mean) if mean is not None else 0.0)
    ax.bar(_names(), means, color=[PALETTE[c] for c in range(NUM_CLASSES)])
    ax.set_ylabel("mean likes")
    ax.set_title("Mean likes per stance category")
    ax.tick_params(axis="x", rotation=30)
    _save(fig, charts_dir / "mean_likes.svg")
    written.append("charts/mean_likes.svg")

    return written
