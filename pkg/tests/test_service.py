"""Annotation HTTP API against a live threaded server."""
from __future__ import annotations

import pytest
import requests

from polemos.annotation import AnnotationSession, QuotaTarget
from polemos.service import AnnotationServer, AnnotationService

from conftest import make_comment


@pytest.fixture
def live(tmp_path, store):
    batch = [make_comment(i, video_id=f"v{i % 3}", text=f"comentario {i}") for i in range(6)]
    store.append_comments(batch)
    session = AnnotationSession(
        store=store,
        sample_ids=[c.comment_id for c in batch],
        annotations_path=tmp_path / "annotations.jsonl",
        quota=QuotaTarget(2),
    )
    service = AnnotationService(session, export_path=tmp_path / "train.csv")
    server = AnnotationServer(service)
    server.start_background()
    yield server
    server.stop()


def test_schema_lists_seven_labels(live):
    resp = requests.get(f"{live.url}/api/schema", timeout=5)
    assert resp.status_code == 200
    labels = resp.json()["labels"]
    assert [l["code"] for l in labels] == list(range(7))
    assert all(l["rubric"] for l in labels)


def test_next_returns_task_payload(live):
    resp = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5)
    assert resp.status_code == 200
    task = resp.json()
    for field in ("comment_id", "text", "like_count", "published_at", "video_id", "lease_seconds"):
        assert field in task


def test_label_flow_and_progress(live):
    task = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
    resp = requests.post(
        f"{live.url}/api/label",
        json={"comment_id": task["comment_id"], "code": 6, "annotator": "ana"},
        timeout=5,
    )
    assert resp.status_code == 200
    assert resp.json()["per_label"]["6"] == 1
    progress = requests.get(f"{live.url}/api/progress", timeout=5).json()
    assert progress["per_label"]["6"] == 1
    assert progress["total"] == 1


def test_invalid_label_is_400(live):
    task = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
    resp = requests.post(
        f"{live.url}/api/label",
        json={"comment_id": task["comment_id"], "code": 9, "annotator": "ana"},
        timeout=5,
    )
    assert resp.status_code == 400
    assert resp.json()["error"] == "InvalidLabel"


def test_unknown_comment_is_404(live):
    resp = requests.post(
        f"{live.url}/api/label",
        json={"comment_id": "nope", "code": 3, "annotator": "ana"},
        timeout=5,
    )
    assert resp.status_code == 404
    assert resp.json()["error"] == "NotInSample"


def test_exhausted_is_204(live):
    for _ in range(6):
        task = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
        requests.post(
            f"{live.url}/api/label",
            json={"comment_id": task["comment_id"], "code": 3, "annotator": "ana"},
            timeout=5,
        )
    resp = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5)
    assert resp.status_code == 204


def test_export_is_csv(live):
    task = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
    requests.post(
        f"{live.url}/api/label",
        json={"comment_id": task["comment_id"], "code": 5, "annotator": "ana"},
        timeout=5,
    )
    resp = requests.get(f"{live.url}/api/export", timeout=5)
    assert resp.status_code == 200
    assert resp.headers["Content-Type"].startswith("text/csv")
    lines = resp.text.strip().splitlines()
    assert lines[0] == "text,code"
    assert len(lines) == 2


def test_skip_advances_to_next(live):
    first = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
    resp = requests.post(
        f"{live.url}/api/skip",
        json={"comment_id": first["comment_id"], "annotator": "ana"},
        timeout=5,
    )
    assert resp.status_code == 200
    second = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
    assert second["comment_id"] != first["comment_id"]


def test_retraction_via_null_code(live):
    task = requests.get(f"{live.url}/api/next", params={"annotator": "ana"}, timeout=5).json()
    requests.post(
        f"{live.url}/api/label",
        json={"comment_id": task["comment_id"], "code": 2, "annotator": "ana"},
        timeout=5,
    )
    resp = requests.post(
        f"{live.url}/api/label",
        json={"comment_id": task["comment_id"], "code": None, "annotator": "ana"},
        timeout=5,
    )
    assert resp.status_code == 200
    assert resp.json()["per_label"]["2"] == 0


def test_static_index_served(live):
    resp = requests.get(f"{live.url}/", timeout=5)
    assert resp.status_code == 200
    assert "polemos" in resp.text


def test_static_traversal_blocked(live):
    resp = requests.get(f"{live.url}/../pyproject.toml", timeout=5)
    assert resp.status_code in (400, 404)


def test_missing_annotator_is_400(live):
    resp = requests.get(f"{live.url}/api/next", timeout=5)
    assert resp.status_code == 400
