"""Aggregate labeled comments into the four analytic views.

All aggregation here is pure and exact: counts are integers, means and
percentages are rationals rendered to 2 decimals only at the output edge.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CoverageError, OutOfWindow, UndefinedPercent
from .labels import NUM_CLASSES, check_code, label_for

FORTNIGHT = timedelta(days=14)

# (code, published_at, like_count) triples are the lingua franca here; the
# report builder adapts store comments + predictions into them.
LabeledRow = tuple[int, datetime, int]


@dataclass(frozen=True)
class TimeBin:
    index: int
    start: datetime
    end: datetime  # exclusive


@dataclass
class TrendSeries:
    anchor: datetime
    num_bins: int
    counts: dict[int, list[int]]  # label code -> per-bin counts

    def bins(self) -> list[TimeBin]:
        return [
            TimeBin(i, self.anchor + i * FORTNIGHT, self.anchor + (i + 1) * FORTNIGHT)
            for i in range(self.num_bins)
        ]


@dataclass(frozen=True)
class LeadChangeEvent:
    bin_index: int
    previous_leader: int
    new_leader: int
    margin: int  # new leader's count minus the old leader's, at this bin

    def to_dict(self) -> dict:
        return {
            "bin_index": self.bin_index,
            "previous_leader": self.previous_leader,
            "previous_leader_name": label_for(self.previous_leader).name,
            "new_leader": self.new_leader,
            "new_leader_name": label_for(self.new_leader).name,
            "margin": self.margin,
        }


@dataclass
class AffinityEntry:
    comment_count: int = 0
    like_sum: int = 0

    @property
    def mean_likes(self) -> Fraction | None:
        if self.comment_count == 0:
            return None
        return Fraction(self.like_sum, self.comment_count)


@dataclass
class AffinityReport:
    per_label: dict[int, AffinityEntry] = field(default_factory=dict)


def bin_index_for(t: datetime, anchor: datetime) -> int:
    if t < anchor:
        raise OutOfWindow(f"timestamp {t.isoformat()} precedes anchor {anchor.isoformat()}")
    return int((t - anchor) // FORTNIGHT)


def bin_by_fortnight(rows: Iterable[LabeledRow], anchor: datetime) -> TrendSeries:
    """Half-open 14-day bins anchored at ``anchor``; empty bins materialized."""
    per_bin: dict[int, dict[int, int]] = {}
    max_bin = -1
    for code, published_at, _likes in rows:
        check_code(code)
        b = bin_index_for(published_at, anchor)
        max_bin = max(max_bin, b)
        bucket = per_bin.setdefault(b, {})
        bucket[code] = bucket.get(code, 0) + 1
    num_bins = max_bin + 1
    counts = {
        code: [per_bin.get(b, {}).get(code, 0) for b in range(num_bins)]
        for code in range(NUM_CLASSES)
    }
    return TrendSeries(anchor=anchor, num_bins=num_bins, counts=counts)


def count_by_label(codes: Iterable[int]) -> list[int]:
    counts = [0] * NUM_CLASSES
    for code in codes:
        check_code(code)
        counts[code] += 1
    return counts


def percent_difference(a: int | Fraction, b: int | Fraction) -> Fraction:
    """How much larger ``a`` is than ``b``, as an exact percent."""
    if b == 0:
        raise UndefinedPercent("percent difference against zero base")
    return (Fraction(a) - Fraction(b)) / Fraction(b) * 100


def format_rational(x: Fraction, decimals: int = 2) -> str:
    """Render a rational to fixed decimals, round half to even."""
    q = 10 ** decimals
    scaled = x * q
    floor = scaled.numerator // scaled.denominator
    rem = scaled - floor
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2 != 0):
        floor += 1
    sign = "-" if floor < 0 else ""
    mag = abs(floor)
    return f"{sign}{mag // q}.{mag % q:0{decimals}d}"


def affinity_by_label(rows: Iterable[LabeledRow]) -> AffinityReport:
    """Comment count, like sum, and exact mean likes per label."""
    report = AffinityReport(per_label={code: AffinityEntry() for code in range(NUM_CLASSES)})
    for code, _published_at, likes in rows:
        check_code(code)
        entry = report.per_label[code]
        entry.comment_count += 1
        entry.like_sum += likes
    return report


def detect_lead_changes(
    series: TrendSeries,
    exclude: frozenset[int] | set[int] = frozenset({3, 4}),
) -> list[LeadChangeEvent]:
    """Events where the per-bin argmax over non-excluded labels changes.

    The default exclusions are the no-stance and unrelated categories, which
    sit outside the controversy reading. Ties go to the lowest code.
    """
    considered = [code for code in range(NUM_CLASSES) if code not in exclude]
    if not considered or series.num_bins == 0:
        return []

    def leader(b: int) -> int:
        best = considered[0]
        for code in considered[1:]:
            if series.counts[code][b] > series.counts[best][b]:
                best = code
        return best

    events: list[LeadChangeEvent] = []
    prev = leader(0)
    for b in range(1, series.num_bins):
        cur = leader(b)
        if cur != prev:
            margin = series.counts[cur][b] - series.counts[prev][b]
            events.append(LeadChangeEvent(b, prev, cur, margin))
        prev = cur
    return events


# ---------------------------------------------------------------------------
# Report bundle


@dataclass
class ReportBundle:
    directory: Path
    counts: list[int]
    series: TrendSeries
    affinity: AffinityReport
    lead_changes: list[LeadChangeEvent]
    collapsed: list[int]
    files: list[str]


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _counts_csv(counts: Sequence[int]) -> str:
    lines = ["label_code,label_name,count"]
    for code, n in enumerate(counts):
        lines.append(f"{code},{label_for(code).name},{n}")
    return "\n".join(lines) + "\n"


def _trend_csv(series: TrendSeries) -> str:
    from .textutil import format_rfc3339

    lines = ["bin_index,bin_start,label_code,count"]
    for tb in series.bins():
        for code in range(NUM_CLASSES):
            lines.append(
                f"{tb.index},{format_rfc3339(tb.start)},{code},{series.counts[code][tb.index]}"
            )
    return "\n".join(lines) + "\n"


def _affinity_csv(affinity: AffinityReport) -> str:
    lines = ["label_code,label_name,comment_count,like_sum,mean_likes"]
    for code in range(NUM_CLASSES):
        entry = affinity.per_label[code]
        mean = entry.mean_likes
        rendered = format_rational(mean) if mean is not None else ""
        lines.append(
            f"{code},{label_for(code).name},{entry.comment_count},{entry.like_sum},{rendered}"
        )
    return "\n".join(lines) + "\n"


def build_report(
    store,
    predictions: dict[str, int],
    out_dir: Path,
    anchor: datetime | None = None,
    window_end: datetime | None = None,
    trained_codes: list[int] | None = None,
    january_start: datetime | None = None,
    charts: bool = True,
) -> ReportBundle:
    """Emit the four analytic views plus charts and a machine summary.

    Every stored comment must have a prediction; a coverage gap aborts with
    the missing ids. Rerunning on the same inputs produces identical bytes
    for every table and JSON file.
    """
    from .classifier import collapse_messages, detect_class_collapse
    from .textutil import format_rfc3339, parse_rfc3339

    comments = store.load_all()
    missing = [c.comment_id for c in comments if c.comment_id not in predictions]
    if missing:
        raise CoverageError(
            f"{len(missing)} comments lack predictions", missing_ids=missing
        )

    if anchor is None:
        anchor = min(c.published_at for c in comments) if comments else parse_rfc3339("2023-10-07T00:00:00Z")
    rows: list[LabeledRow] = [
        (predictions[c.comment_id], c.published_at, c.like_count) for c in comments
    ]

    counts = count_by_label(code for code, _, _ in rows)
    series = bin_by_fortnight(rows, anchor)
    affinity = affinity_by_label(rows)
    lead_changes = detect_lead_changes(series)
    collapsed = detect_class_collapse(counts, trained_codes=trained_codes)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    _write_text(out_dir / "counts.csv", _counts_csv(counts))
    files.append("counts.csv")
    _write_text(out_dir / "trend.csv", _trend_csv(series))
    files.append("trend.csv")
    _write_text(out_dir / "affinity.csv", _affinity_csv(affinity))
    files.append("affinity.csv")

    _write_text(
        out_dir / "lead_changes.json",
        json.dumps([ev.to_dict() for ev in lead_changes], ensure_ascii=False, indent=2, sort_keys=True) + "\n",
    )
    files.append("lead_changes.json")

    # The January view is the subset of bins intersecting [january_start, window_end).
    if january_start is None:
        january_start = parse_rfc3339("2024-01-01T00:00:00Z")
    january_bins = [
        tb.index
        for tb in series.bins()
        if tb.end > january_start and (window_end is None or tb.start < window_end)
    ]

    summary = {
        "total_comments": len(rows),
        "counts_by_label": {
            label_for(code).name: counts[code] for code in range(NUM_CLASSES)
        },
        "anchor": format_rfc3339(anchor),
        "num_bins": series.num_bins,
        "january_bins": january_bins,
        "lead_changes": [ev.to_dict() for ev in lead_changes],
        "class_collapse": {
            "codes": collapsed,
            "warnings": collapse_messages(collapsed),
        },
        "mean_likes": {
            label_for(code).name: (
                format_rational(affinity.per_label[code].mean_likes)
                if affinity.per_label[code].mean_likes is not None
                else None
            )
            for code in range(NUM_CLASSES)
        },
        "percent_differences": _headline_percents(counts),
    }
    _write_text(
        out_dir / "summary.json",
        json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
    )
    files.append("summary.json")

    if charts:
        from .charts import render_charts

        files.extend(
            render_charts(out_dir / "charts", counts, series, affinity, january_bins)
        )

    return ReportBundle(
        directory=out_dir,
        counts=counts,
        series=series,
        affinity=affinity,
        lead_changes=lead_changes,
        collapsed=collapsed,
        files=files,
    )


def _headline_percents(counts: Sequence[int]) -> dict:
    """Pairwise count gaps the write-up leans on, rendered to 2 decimals."""
    out: dict[str, str | None] = {}
    pairs = [
        ("PRO_PALESTINO_vs_PRO_ISRAEL", 6, 5),
        ("ANTI_ISRAEL_vs_ANTI_PALESTINO", 1, 2),
    ]
    for name, a, b in pairs:
        if counts[b] == 0:
            out[name] = None
        else:
            out[name] = format_rational(percent_difference(counts[a], counts[b]))
    return out
