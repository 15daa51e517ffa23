"""HTTP JSON API for annotation, plus static assets for the labeling UI.

Endpoints consumed by the web client:
  GET  /api/next?annotator=X  -> task JSON, or 204 when the sample is done
  POST /api/label             -> {comment_id, code, annotator}; null code retracts
  POST /api/skip              -> {comment_id, annotator}
  GET  /api/progress          -> per-label counts and targets
  GET  /api/schema            -> the 7 labels with rubric text
  GET  /api/export            -> training set as text/csv
"""
from __future__ import annotations

import json
import logging
import mimetypes
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .annotation import AnnotationSession, Exhausted, export_training_set
from .corpus import VideoRef
from .errors import InvalidLabel, NotInSample
from .labels import schema_as_dicts
from .textutil import format_rfc3339

logger = logging.getLogger(__name__)

DEFAULT_STATIC_DIR = Path(__file__).parent / "static"


class AnnotationService:
    """Wires an AnnotationSession to the HTTP surface."""

    def __init__(
        self,
        session: AnnotationSession,
        videos: dict[str, VideoRef] | None = None,
        static_dir: Path | None = None,
        export_path: Path | None = None,
    ):
        self.session = session
        self.videos = videos or {}
        self.static_dir = Path(static_dir) if static_dir else DEFAULT_STATIC_DIR
        self.export_path = export_path

    # -- handlers return (status, content_type, body_bytes)

    def handle_next(self, annotator: str):
        task = self.session.next_task(annotator)
        if isinstance(task, Exhausted):
            return 204, None, b""
        video = self.videos.get(task.video_id)
        payload = {
            "comment_id": task.comment_id,
            "text": task.text,
            "author": task.author,
            "like_count": task.like_count,
            "published_at": format_rfc3339(task.published_at),
            "video_id": task.video_id,
            "video_title": video.title if video else "",
            "video_channel": video.channel if video else "",
            "lease_seconds": self.session.lease_seconds,
        }
        return 200, "application/json", _json_bytes(payload)

    def handle_label(self, body: dict):
        comment_id = body.get("comment_id")
        annotator = body.get("annotator")
        code = body.get("code", None)
        if not comment_id or not annotator:
            return 400, "application/json", _json_bytes(
                {"error": "BadRequest", "detail": "comment_id and annotator required"}
            )
        try:
            progress = self.session.record_label(comment_id, code, annotator)
        except InvalidLabel as exc:
            return 400, "application/json", _json_bytes({"error": "InvalidLabel", "detail": str(exc)})
        except NotInSample as exc:
            return 404, "application/json", _json_bytes({"error": "NotInSample", "detail": str(exc)})
        return 200, "application/json", _json_bytes(progress.to_dict())

    def handle_skip(self, body: dict):
        comment_id = body.get("comment_id")
        annotator = body.get("annotator")
        if not comment_id or not annotator:
            return 400, "application/json", _json_bytes(
                {"error": "BadRequest", "detail": "comment_id and annotator required"}
            )
        self.session.skip(comment_id, annotator)
        return 200, "application/json", _json_bytes({"skipped": comment_id})

    def handle_progress(self):
        return 200, "application/json", _json_bytes(self.session.progress().to_dict())

    def handle_schema(self):
        return 200, "application/json", _json_bytes({"labels": schema_as_dicts()})

    def handle_export(self):
        if self.export_path is not None:
            out = Path(self.export_path)
            export_training_set(self.session, out)
            data = out.read_bytes()
        else:
            with tempfile.TemporaryDirectory() as tmp:
                out = Path(tmp) / "training_set.csv"
                export_training_set(self.session, out)
                data = out.read_bytes()
        return 200, "text/csv; charset=utf-8", data

    def handle_static(self, path: str):
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        try:
            target.relative_to(self.static_dir.resolve())
        except ValueError:
            return 404, "text/plain", b"not found"
        if not target.is_file():
            return 404, "text/plain", b"not found"
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        return 200, ctype, target.read_bytes()


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, ensure_ascii=False) + "\n").encode("utf-8")


def make_handler(service: AnnotationService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.debug("%s - %s", self.address_string(), fmt % args)

        def _send(self, status: int, ctype: str | None, body: bytes):
            self.send_response(status)
            if ctype:
                self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            if body:
                self.wfile.write(body)

        def do_GET(self):
            parsed = urlparse(self.path)
            route = parsed.path
            if route == "/api/next":
                annotator = parse_qs(parsed.query).get("annotator", [""])[0]
                if not annotator:
                    self._send(400, "application/json", _json_bytes({"error": "BadRequest", "detail": "annotator required"}))
                    return
                self._send(*service.handle_next(annotator))
            elif route == "/api/progress":
                self._send(*service.handle_progress())
            elif route == "/api/schema":
                self._send(*service.handle_schema())
            elif route == "/api/export":
                self._send(*service.handle_export())
            else:
                self._send(*service.handle_static(route))

        def do_POST(self):
            parsed = urlparse(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw.decode("utf-8"))
            except json.JSONDecodeError:
                self._send(400, "application/json", _json_bytes({"error": "BadRequest", "detail": "invalid JSON"}))
                return
            if parsed.path == "/api/label":
                self._send(*service.handle_label(body))
            elif parsed.path == "/api/skip":
                self._send(*service.handle_skip(body))
            else:
                self._send(404, "application/json", _json_bytes({"error": "NotFound"}))

    return Handler


class AnnotationServer:
    """ThreadingHTTPServer wrapper with a background-serve mode for tests."""

    def __init__(self, service: AnnotationService, host: str = "127.0.0.1", port: int = 0):
        self.httpd = ThreadingHTTPServer((host, port), make_handler(service))
        self.service = service
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[0], self.httpd.server_address[1]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
