"""Shared fixtures and small builders for the test suite."""
from __future__ import annotations

from datetime import timedelta
from pathlib import Path

import pytest

from polemos.corpus import Comment, CorpusStore, StudyWindow
from polemos.textutil import parse_rfc3339

WINDOW_START = parse_rfc3339("2023-10-07T00:00:00Z")
WINDOW_END = parse_rfc3339("2024-01-08T00:00:00Z")


def make_comment(
    i: int,
    video_id: str = "v000",
    text: str = "comentario de prueba",
    offset_days: float = 1.0,
    like_count: int = 0,
    author: str | None = None,
) -> Comment:
    return Comment(
        comment_id=f"c{i:05d}",
        author=author or f"user{i % 7}",
        published_at=WINDOW_START + timedelta(days=offset_days),
        like_count=like_count,
        text=text,
        video_id=video_id,
    )


@pytest.fixture
def window() -> StudyWindow:
    return StudyWindow(start=WINDOW_START, end=WINDOW_END)


@pytest.fixture
def store(tmp_path: Path) -> CorpusStore:
    return CorpusStore(tmp_path / "corpus.jsonl")
