"""Corpus store: newline-delimited JSON persistence for comments and videos.

One comment per line, UTF-8, field names fixed by the file contract:
``comment_id, author, published_at, like_count, text, video_id, is_public``.
Appends are serialized and atomic per batch; readers may run concurrently.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator

from .errors import StorageError
from .textutil import alphabetic_count, format_rfc3339, parse_rfc3339, strip_pictographic


@dataclass(frozen=True)
class Comment:
    comment_id: str
    author: str
    published_at: datetime  # aware UTC
    like_count: int
    text: str
    video_id: str
    is_public: bool = True

    def validate(self) -> None:
        if not self.comment_id:
            raise StorageError("comment_id must be non-empty")
        if self.like_count < 0:
            raise StorageError(f"negative like_count on {self.comment_id}")
        if self.published_at.tzinfo is None:
            raise StorageError(f"naive timestamp on {self.comment_id}")

    def to_record(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "author": self.author,
            "published_at": format_rfc3339(self.published_at),
            "like_count": self.like_count,
            "text": self.text,
            "video_id": self.video_id,
            "is_public": self.is_public,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Comment":
        return cls(
            comment_id=str(rec["comment_id"]),
            author=str(rec["author"]),
            published_at=parse_rfc3339(rec["published_at"]),
            like_count=int(rec["like_count"]),
            text=str(rec["text"]),
            video_id=str(rec["video_id"]),
            is_public=bool(rec["is_public"]),
        )


@dataclass(frozen=True)
class VideoRef:
    video_id: str
    title: str
    channel: str
    matched_query: str
    published_at: datetime

    def to_record(self) -> dict:
        return {
            "video_id": self.video_id,
            "title": self.title,
            "channel": self.channel,
            "matched_query": self.matched_query,
            "published_at": format_rfc3339(self.published_at),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "VideoRef":
        return cls(
            video_id=str(rec["video_id"]),
            title=str(rec["title"]),
            channel=str(rec["channel"]),
            matched_query=str(rec["matched_query"]),
            published_at=parse_rfc3339(rec["published_at"]),
        )


@dataclass(frozen=True)
class StudyWindow:
    start: datetime  # inclusive
    end: datetime  # exclusive

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError("window start must precede end")

    def contains(self, t: datetime) -> bool:
        return self.start <= t < self.end


# Capture ran on 8 January 2024 for comments through 7 January.
DEFAULT_WINDOW = StudyWindow(
    start=parse_rfc3339("2023-10-07T00:00:00Z"),
    end=parse_rfc3339("2024-01-08T00:00:00Z"),
)


@dataclass
class CleanReport:
    input_count: int = 0
    removed_empty: int = 0
    removed_non_referential: int = 0
    removed_out_of_window: int = 0
    removed_duplicate: int = 0
    output_count: int = 0

    def balances(self) -> bool:
        removed = (
            self.removed_empty
            + self.removed_non_referential
            + self.removed_out_of_window
            + self.removed_duplicate
        )
        return self.output_count == self.input_count - removed

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "removed_empty": self.removed_empty,
            "removed_non_referential": self.removed_non_referential,
            "removed_out_of_window": self.removed_out_of_window,
            "removed_duplicate": self.removed_duplicate,
            "output_count": self.output_count,
        }


class CorpusStore:
    """Single-writer, multi-reader JSONL store for one comment dataset."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._write_lock = threading.Lock()
        self._known_ids: set[str] | None = None

    def exists(self) -> bool:
        return self.path.exists()

    def _load_ids(self) -> set[str]:
        if self._known_ids is None:
            ids: set[str] = set()
            if self.path.exists():
                for comment in self.iter_comments():
                    ids.add(comment.comment_id)
            self._known_ids = ids
        return self._known_ids

    def __len__(self) -> int:
        return len(self._load_ids())

    def iter_comments(self) -> Iterator[Comment]:
        if not self.path.exists():
            return
        with self.path.open("r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield Comment.from_record(json.loads(line))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise StorageError(f"{self.path}:{lineno}: bad record: {exc}")

    def load_all(self) -> list[Comment]:
        return list(self.iter_comments())

    def append_comments(self, batch: Iterable[Comment]) -> int:
        """Persist comments with novel ids in arrival order; skip duplicates.

        The whole batch is validated and encoded before a single buffered
        write, so an invalid record aborts with no partial append.
        """
        with self._write_lock:
            known = self._load_ids()
            lines: list[str] = []
            fresh: list[str] = []
            for comment in batch:
                comment.validate()
                if comment.comment_id in known or comment.comment_id in fresh:
                    continue
                fresh.append(comment.comment_id)
                lines.append(
                    json.dumps(comment.to_record(), ensure_ascii=False) + "\n"
                )
            if not lines:
                return 0
            self.path.parent.mkdir(parents=True, exist_ok=True)
            try:
                with self.path.open("a", encoding="utf-8") as f:
                    f.write("".join(lines))
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as exc:
                raise StorageError(f"append to {self.path} failed: {exc}")
            known.update(fresh)
            return len(fresh)

    def rewrite(self, comments: Iterable[Comment]) -> int:
        """Replace the dataset atomically (write temp file, then rename)."""
        with self._write_lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            count = 0
            with tmp.open("w", encoding="utf-8") as f:
                for comment in comments:
                    comment.validate()
                    f.write(json.dumps(comment.to_record(), ensure_ascii=False) + "\n")
                    count += 1
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, self.path)
            self._known_ids = None
            return count


def is_referential(text: str, min_alpha: int = 2) -> bool:
    """True when the text keeps >= min_alpha alphabetic code points after
    stripping pictographic/emoji code points."""
    return alphabetic_count(strip_pictographic(text)) >= min_alpha


def clean_corpus(
    store: CorpusStore,
    window: StudyWindow,
    out_store: CorpusStore,
    min_alpha: int = 2,
) -> CleanReport:
    """Filter the raw dataset into ``out_store`` and account for removals.

    A comment survives iff its trimmed text is non-empty, it is referential
    (see :func:`is_referential`), its timestamp falls in the half-open study
    window, and it is not a duplicate of an earlier survivor by
    (video_id, author, text, published_at). Raw data is left untouched.
    """
    report = CleanReport()
    seen: set[tuple[str, str, str, str]] = set()
    survivors: list[Comment] = []
    for comment in store.iter_comments():
        report.input_count += 1
        if not comment.text.strip():
            report.removed_empty += 1
            continue
        if not is_referential(comment.text, min_alpha=min_alpha):
            report.removed_non_referential += 1
            continue
        if not window.contains(comment.published_at):
            report.removed_out_of_window += 1
            continue
        key = (
            comment.video_id,
            comment.author,
            comment.text,
            format_rfc3339(comment.published_at),
        )
        if key in seen:
            report.removed_duplicate += 1
            continue
        seen.add(key)
        survivors.append(comment)
    report.output_count = out_store.rewrite(survivors)
    return report


@dataclass
class CorpusStats:
    count: int = 0
    per_video: dict[str, int] = field(default_factory=dict)
    date_min: datetime | None = None
    date_max: datetime | None = None
    like_sum: int = 0

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "per_video": dict(sorted(self.per_video.items())),
            "date_min": format_rfc3339(self.date_min) if self.date_min else None,
            "date_max": format_rfc3339(self.date_max) if self.date_max else None,
            "like_sum": self.like_sum,
        }


def corpus_stats(store: CorpusStore) -> CorpusStats:
    stats = CorpusStats()
    for comment in store.iter_comments():
        stats.count += 1
        stats.per_video[comment.video_id] = stats.per_video.get(comment.video_id, 0) + 1
        stats.like_sum += comment.like_count
        if stats.date_min is None or comment.published_at < stats.date_min:
            stats.date_min = comment.published_at
        if stats.date_max is None or comment.published_at > stats.date_max:
            stats.date_max = comment.published_at
    return stats


def write_video_list(path: Path, videos: Iterable[VideoRef]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as f:
        for video in videos:
            f.write(json.dumps(video.to_record(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_video_list(path: Path) -> list[VideoRef]:
    videos: list[VideoRef] = []
    if not path.exists():
        return videos
    with path.open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                videos.append(VideoRef.from_record(json.loads(line)))
    return videos
