"""Annotation: seeded sampling, quota tracking, stage machine, and the
session object the labeling service drives.

Annotation records are append-only JSONL; the active record for a
(comment_id, annotator) pair is the last one written, so overwrites keep a
full audit trail. A record with a null code retracts the pair.
"""
from __future__ import annotations

import json
import random
import threading
import time
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from .corpus import Comment, CorpusStore
from .errors import IllegalTransition, InsufficientCorpus, NotInSample
from .labels import NUM_CLASSES, check_code
from .textutil import format_rfc3339, parse_rfc3339


class SamplingSkewWarning(UserWarning):
    """One video contributes more than the allowed fraction of the sample."""


@dataclass(frozen=True)
class QuotaTarget:
    per_label_target: int = 200

    @property
    def total_target(self) -> int:
        return self.per_label_target * NUM_CLASSES


@dataclass
class QuotaProgress:
    per_label: dict[int, int]
    per_label_target: int

    @property
    def total(self) -> int:
        return sum(self.per_label.values())

    def met(self, code: int) -> bool:
        return self.per_label.get(code, 0) >= self.per_label_target

    def all_met(self) -> bool:
        return all(self.met(code) for code in range(NUM_CLASSES))

    def to_dict(self) -> dict:
        return {
            "per_label": {str(code): self.per_label.get(code, 0) for code in range(NUM_CLASSES)},
            "per_label_target": self.per_label_target,
            "total": self.total,
            "total_target": self.per_label_target * NUM_CLASSES,
        }


def sample_for_annotation(
    store: CorpusStore,
    n: int,
    seed: int,
    max_per_video_fraction: Fraction | float = Fraction(1, 10),
) -> list[str]:
    """Uniform sample of comment ids without replacement, seeded.

    Warns (does not fail) when any single video supplies more than
    ``max_per_video_fraction`` of the sample, a clustering-bias smell.
    """
    comments = store.load_all()
    if n > len(comments):
        raise InsufficientCorpus(f"asked for {n} of {len(comments)} comments")
    ids = [c.comment_id for c in comments]
    chosen = random.Random(seed).sample(ids, n)

    video_of = {c.comment_id: c.video_id for c in comments}
    per_video: dict[str, int] = {}
    for cid in chosen:
        vid = video_of[cid]
        per_video[vid] = per_video.get(vid, 0) + 1
    limit = Fraction(max_per_video_fraction).limit_denominator(10**9)
    for vid, count in sorted(per_video.items()):
        if Fraction(count, n) > limit:
            warnings.warn(
                f"video {vid} contributes {count}/{n} of the sample "
                f"(> {float(limit):.0%})",
                SamplingSkewWarning,
            )
    return chosen


# ---------------------------------------------------------------------------
# MATTER+PD stage machine


STAGES = ("MODEL", "PROCURE", "ANNOTATE", "TRAIN_TEST", "EVALUATE", "REVISE", "DISTRIBUTE")

ALLOWED_TRANSITIONS: dict[str, frozenset[str]] = {
    "MODEL": frozenset({"PROCURE"}),
    "PROCURE": frozenset({"ANNOTATE"}),
    "ANNOTATE": frozenset({"TRAIN_TEST"}),
    "TRAIN_TEST": frozenset({"EVALUATE"}),
    "EVALUATE": frozenset({"REVISE", "DISTRIBUTE"}),
    "REVISE": frozenset({"ANNOTATE"}),
    "DISTRIBUTE": frozenset(),
}


@dataclass
class PipelineStage:
    stage: str
    entered_at: datetime
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "entered_at": format_rfc3339(self.entered_at),
            "note": self.note,
        }


class StageState:
    """Append-only stage history; always a path in the transition graph."""

    def __init__(self, history: list[PipelineStage] | None = None):
        self.history = history or [
            PipelineStage("MODEL", datetime.now(timezone.utc), "initialized")
        ]

    @property
    def current(self) -> str:
        return self.history[-1].stage

    def advance(self, to_stage: str, note: str = "", force: bool = False) -> PipelineStage:
        if to_stage not in STAGES:
            raise IllegalTransition(f"unknown stage {to_stage!r}")
        allowed = ALLOWED_TRANSITIONS[self.current]
        if to_stage not in allowed and not force:
            raise IllegalTransition(f"{self.current} -> {to_stage} is not allowed")
        entry = PipelineStage(to_stage, datetime.now(timezone.utc), note)
        self.history.append(entry)
        return entry

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"history": [e.to_dict() for e in self.history]}
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "StageState":
        if not Path(path).exists():
            return cls()
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        history = [
            PipelineStage(e["stage"], parse_rfc3339(e["entered_at"]), e.get("note", ""))
            for e in payload["history"]
        ]
        return cls(history)


def advance_stage(state: StageState, to_stage: str, note: str = "") -> PipelineStage:
    return state.advance(to_stage, note=note)


# ---------------------------------------------------------------------------
# Annotation session


@dataclass(frozen=True)
class AnnotationRecord:
    comment_id: str
    code: int | None  # None retracts the pair
    annotator: str
    annotated_at: datetime

    def to_record(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "code": self.code,
            "annotator": self.annotator,
            "annotated_at": format_rfc3339(self.annotated_at),
        }


class Exhausted:
    """Sentinel: every sampled comment is labeled for this annotator."""


EXHAUSTED = Exhausted()


@dataclass
class _Lease:
    annotator: str
    expires_at: float


class AnnotationSession:
    """Serves sampled comments to annotators and persists their labels.

    Task handout uses short-lived leases so concurrent annotators do not
    duplicate work; label writes are serialized. In the REVISE stage,
    comments whose current label belongs to the most undersupplied category
    are preferred; otherwise handout follows sample order.
    """

    def __init__(
        self,
        store: CorpusStore,
        sample_ids: list[str],
        annotations_path: Path,
        quota: QuotaTarget = QuotaTarget(),
        lease_seconds: float = 600.0,
        stage: str = "ANNOTATE",
        clock=time.monotonic,
    ):
        self.store = store
        self.sample_ids = list(sample_ids)
        self.annotations_path = Path(annotations_path)
        self.quota = quota
        self.lease_seconds = lease_seconds
        self.stage = stage
        self._clock = clock
        self._lock = threading.Lock()
        self._leases: dict[str, _Lease] = {}
        self._skipped: dict[str, set[str]] = {}  # annotator -> comment ids

        sample_set = set(self.sample_ids)
        self._comments: dict[str, Comment] = {
            c.comment_id: c for c in store.iter_comments() if c.comment_id in sample_set
        }
        missing = sample_set - set(self._comments)
        if missing:
            raise NotInSample(f"sample references {len(missing)} ids missing from the store")

        # active[(comment_id, annotator)] = last non-retracted record
        self._active: dict[tuple[str, str], AnnotationRecord] = {}
        self._order: list[AnnotationRecord] = []
        if self.annotations_path.exists():
            with self.annotations_path.open("r", encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    record = AnnotationRecord(
                        comment_id=rec["comment_id"],
                        code=rec["code"],
                        annotator=rec["annotator"],
                        annotated_at=parse_rfc3339(rec["annotated_at"]),
                    )
                    self._apply(record)

    def _apply(self, record: AnnotationRecord) -> None:
        key = (record.comment_id, record.annotator)
        if record.code is None:
            self._active.pop(key, None)
        else:
            self._active[key] = record
        self._order.append(record)

    def _persist(self, record: AnnotationRecord) -> None:
        self.annotations_path.parent.mkdir(parents=True, exist_ok=True)
        with self.annotations_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(record.to_record(), ensure_ascii=False) + "\n")

    def _labeled_by(self, annotator: str) -> set[str]:
        return {cid for (cid, who) in self._active if who == annotator}

    def active_codes(self) -> dict[str, int]:
        """Latest active label per comment across annotators, one pass.

        Only records still active for their (comment, annotator) pair count,
        so overwrites and retractions fall out naturally.
        """
        latest: dict[str, int] = {}
        for record in self._order:
            key = (record.comment_id, record.annotator)
            if self._active.get(key) is record:
                latest[record.comment_id] = record.code
        return latest

    def active_code(self, comment_id: str) -> int | None:
        return self.active_codes().get(comment_id)

    def progress(self) -> QuotaProgress:
        per_label = {code: 0 for code in range(NUM_CLASSES)}
        for record in self._active.values():
            per_label[record.code] += 1
        return QuotaProgress(per_label, self.quota.per_label_target)

    def _candidates(self, annotator: str) -> list[str]:
        now = self._clock()
        labeled = self._labeled_by(annotator)
        out = []
        for cid in self.sample_ids:
            if cid in labeled:
                continue
            lease = self._leases.get(cid)
            if lease and lease.annotator != annotator and lease.expires_at > now:
                continue
            out.append(cid)
        skipped = self._skipped.get(annotator, set())
        if skipped and any(cid not in skipped for cid in out):
            out = [cid for cid in out if cid not in skipped] + [
                cid for cid in out if cid in skipped
            ]
        return out

    def next_task(self, annotator: str) -> Comment | Exhausted:
        with self._lock:
            candidates = self._candidates(annotator)
            if not candidates:
                return EXHAUSTED
            if self.stage == "REVISE":
                progress = self.progress()
                deficit = {
                    code: self.quota.per_label_target - progress.per_label.get(code, 0)
                    for code in range(NUM_CLASSES)
                }
                codes = self.active_codes()
                position = {cid: i for i, cid in enumerate(self.sample_ids)}

                def priority(cid: str) -> tuple:
                    code = codes.get(cid)
                    # labeled-in-undersupplied-category first, biggest deficit first
                    if code is not None and deficit[code] > 0:
                        return (0, -deficit[code], position[cid])
                    return (1, 0, position[cid])

                candidates.sort(key=priority)
            chosen = candidates[0]
            self._leases[chosen] = _Lease(annotator, self._clock() + self.lease_seconds)
            return self._comments[chosen]

    def record_label(self, comment_id: str, code: int | None, annotator: str) -> QuotaProgress:
        if comment_id not in self._comments:
            raise NotInSample(f"comment {comment_id!r} is not in the session sample")
        if code is not None:
            check_code(code)
        with self._lock:
            record = AnnotationRecord(
                comment_id=comment_id,
                code=code,
                annotator=annotator,
                annotated_at=datetime.now(timezone.utc),
            )
            self._persist(record)
            self._apply(record)
            self._leases.pop(comment_id, None)
            return self.progress()

    def skip(self, comment_id: str, annotator: str) -> None:
        """Push a task to the back of this annotator's queue."""
        with self._lock:
            lease = self._leases.get(comment_id)
            if lease and lease.annotator == annotator:
                del self._leases[comment_id]
            self._skipped.setdefault(annotator, set()).add(comment_id)


@dataclass
class BalanceReport:
    per_label: dict[int, int]
    per_label_target: int
    undersupplied: list[int]

    def to_dict(self) -> dict:
        return {
            "per_label": {str(k): v for k, v in sorted(self.per_label.items())},
            "per_label_target": self.per_label_target,
            "undersupplied": self.undersupplied,
        }


def export_training_set(session: AnnotationSession, out_path: Path) -> BalanceReport:
    """Write (text, code) pairs as CSV in sample order; stable bytes.

    A comment labeled by several annotators exports once, with the latest
    active record winning (no adjudication is modeled).
    """
    import csv as _csv

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    per_label = {code: 0 for code in range(NUM_CLASSES)}
    codes = session.active_codes()
    with out_path.open("w", encoding="utf-8", newline="") as f:
        writer = _csv.writer(f, lineterminator="\n")
        writer.writerow(["text", "code"])
        for cid in session.sample_ids:
            code = codes.get(cid)
            if code is None:
                continue
            writer.writerow([session._comments[cid].text, code])
            per_label[code] += 1
    undersupplied = [
        code
        for code in range(NUM_CLASSES)
        if per_label[code] < session.quota.per_label_target
    ]
    return BalanceReport(per_label, session.quota.per_label_target, undersupplied)


def load_training_set(path: Path) -> list[tuple[str, int]]:
    import csv as _csv

    rows: list[tuple[str, int]] = []
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in _csv.DictReader(f):
            rows.append((row["text"], int(row["code"])))
    return rows
