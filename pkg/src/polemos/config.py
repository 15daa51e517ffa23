"""Declarative pipeline configuration: one JSON document, flags override."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .classifier import TrainConfig
from .corpus import DEFAULT_WINDOW, StudyWindow
from .errors import PolemosError
from .ingest import QuotaBudget, SearchQuery
from .textutil import parse_rfc3339


class ConfigError(PolemosError):
    pass


DEFAULT_PATHS = {
    "videos": "data/videos.jsonl",
    "raw": "data/raw_comments.jsonl",
    "clean": "data/clean_comments.jsonl",
    "clean_report": "data/clean_report.json",
    "sample": "data/sample.json",
    "annotations": "data/annotations.jsonl",
    "training_set": "data/training_set.csv",
    "model": "models/model.json",
    "metrics": "models/metrics.json",
    "predictions": "predictions/predictions.csv",
    "prediction_summary": "predictions/summary.json",
    "reports": "reports",
    "state": "state.json",
    "lock": ".polemos.lock",
}


@dataclass
class AnnotationConfig:
    per_label_target: int = 200
    sample_size: int = 1400
    sample_seed: int = 7
    max_per_video_fraction: float = 0.1
    lease_seconds: float = 600.0
    oracle: str | None = None  # truth file for headless annotation runs


@dataclass
class ApiConfig:
    base_url: str = "https://www.googleapis.com/youtube/v3"
    concurrency: int = 4
    retries: int = 3
    backoff_base: float = 1.0
    timeout: float = 30.0
    video_allowlist: str | None = None  # file of video ids, one per line


@dataclass
class RemoteConfig:
    endpoint: str | None = None
    batch_size: int = 32
    timeout: float = 10.0


@dataclass
class PipelineConfig:
    base_dir: Path
    window: StudyWindow
    queries: list[SearchQuery]
    quota: QuotaBudget
    annotation: AnnotationConfig
    train: TrainConfig
    api: ApiConfig
    remote: RemoteConfig
    accuracy_gate: Fraction = Fraction(90, 100)
    paths: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_PATHS))

    def path(self, key: str) -> Path:
        return (self.base_dir / self.paths[key]).resolve()

    def validate(self) -> None:
        if not 0 < self.accuracy_gate <= 1:
            raise ConfigError(f"accuracy_gate must be in (0,1], got {float(self.accuracy_gate)}")
        resolved = [self.path(key) for key in self.paths]
        if len(set(resolved)) != len(resolved):
            raise ConfigError("configured paths must be distinct")


def load_config(path: Path | str) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")

    base_dir = (path.parent / raw.get("workdir", ".")).resolve()

    window_raw = raw.get("window", {})
    window = StudyWindow(
        start=parse_rfc3339(window_raw.get("start", "2023-10-07T00:00:00Z")),
        end=parse_rfc3339(window_raw.get("end", "2024-01-08T00:00:00Z")),
    ) if window_raw else DEFAULT_WINDOW

    queries = [
        SearchQuery(
            term=q["term"],
            published_after=parse_rfc3339(q.get("published_after")) if q.get("published_after") else window.start,
            published_before=parse_rfc3339(q.get("published_before")) if q.get("published_before") else window.end,
            max_videos=int(q.get("max_videos", 50)),
        )
        for q in raw.get("queries", [])
    ]

    quota_raw = raw.get("quota", {})
    quota = QuotaBudget(
        units_total=int(quota_raw.get("units_total", 10_000)),
        cost_per_search=int(quota_raw.get("cost_per_search", 100)),
        cost_per_thread_page=int(quota_raw.get("cost_per_thread_page", 1)),
    )

    ann_raw = raw.get("annotation", {})
    annotation = AnnotationConfig(
        per_label_target=int(ann_raw.get("per_label_target", 200)),
        sample_size=int(ann_raw.get("sample_size", 1400)),
        sample_seed=int(ann_raw.get("sample_seed", 7)),
        max_per_video_fraction=float(ann_raw.get("max_per_video_fraction", 0.1)),
        lease_seconds=float(ann_raw.get("lease_seconds", 600.0)),
        oracle=ann_raw.get("oracle"),
    )

    train_raw = raw.get("train", {})
    train = TrainConfig(
        epochs=int(train_raw.get("epochs", 15)),
        learning_rate=float(train_raw.get("learning_rate", 0.1)),
        l2=float(train_raw.get("l2", 1e-6)),
        seed=int(train_raw.get("seed", 13)),
        holdout_fraction=float(train_raw.get("holdout_fraction", 0.2)),
    )

    api_raw = raw.get("api", {})
    api = ApiConfig(
        base_url=str(api_raw.get("base_url", ApiConfig.base_url)),
        concurrency=int(api_raw.get("concurrency", 4)),
        retries=int(api_raw.get("retries", 3)),
        backoff_base=float(api_raw.get("backoff_base", 1.0)),
        timeout=float(api_raw.get("timeout", 30.0)),
        video_allowlist=api_raw.get("video_allowlist"),
    )

    remote_raw = raw.get("remote", {})
    remote = RemoteConfig(
        endpoint=remote_raw.get("endpoint"),
        batch_size=int(remote_raw.get("batch_size", 32)),
        timeout=float(remote_raw.get("timeout", 10.0)),
    )

    gate = raw.get("accuracy_gate", 0.90)
    accuracy_gate = Fraction(str(gate)).limit_denominator(10**6)

    paths = dict(DEFAULT_PATHS)
    paths.update(raw.get("paths", {}))

    config = PipelineConfig(
        base_dir=base_dir,
        window=window,
        queries=queries,
        quota=quota,
        annotation=annotation,
        train=train,
        api=api,
        remote=remote,
        accuracy_gate=accuracy_gate,
        paths=paths,
    )
    config.validate()
    return config
