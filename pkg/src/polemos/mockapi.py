"""Local mock of the platform data API, driven by canned JSON fixtures.

Fixture format: a directory with one JSON file per endpoint (``search.json``,
``commentThreads.json``). Each file holds a list of entries::

    {"params": {"q": "...", "pageToken": null}, "status": 200,
     "fail_times": 0, "response": {...}}

A request matches the first entry whose params all agree with the query
string; a param valued null requires the key to be absent. ``fail_times``
makes the entry answer 500 that many times before succeeding, which is how
the retry paths get exercised.

Run standalone: ``python -m polemos.mockapi --fixture DIR --port 8099``.
"""
from __future__ import annotations

import argparse
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

logger = logging.getLogger(__name__)

ENDPOINTS = ("search", "commentThreads")


class MockPlatformApi:
    def __init__(self, fixture_dir: Path, host: str = "127.0.0.1", port: int = 0):
        self.fixture_dir = Path(fixture_dir)
        self.entries: dict[str, list[dict]] = {}
        for endpoint in ENDPOINTS:
            path = self.fixture_dir / f"{endpoint}.json"
            self.entries[endpoint] = (
                json.loads(path.read_text(encoding="utf-8")) if path.exists() else []
            )
        self._fail_lock = threading.Lock()
        self._fails_left: dict[tuple[str, int], int] = {
            (endpoint, i): int(entry.get("fail_times", 0))
            for endpoint, entries in self.entries.items()
            for i, entry in enumerate(entries)
        }
        self.request_log: list[tuple[str, dict]] = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                logger.debug(fmt % args)

            def do_GET(self):
                parsed = urlparse(self.path)
                endpoint = parsed.path.rstrip("/").rsplit("/", 1)[-1]
                params = {k: v[0] for k, v in parse_qs(parsed.query).items()}
                params.pop("key", None)
                server.request_log.append((endpoint, params))
                status, payload = server.respond(endpoint, params)
                body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    def respond(self, endpoint: str, params: dict) -> tuple[int, dict]:
        for i, entry in enumerate(self.entries.get(endpoint, [])):
            if not _params_match(entry.get("params", {}), params):
                continue
            with self._fail_lock:
                left = self._fails_left.get((endpoint, i), 0)
                if left > 0:
                    self._fails_left[(endpoint, i)] = left - 1
                    return 500, {"error": {"message": "transient mock failure"}}
            return int(entry.get("status", 200)), entry.get("response", {})
        return 404, {"error": {"message": f"no fixture for {endpoint} {params}"}}

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[0], self.httpd.server_address[1]
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


def _params_match(wanted: dict, got: dict) -> bool:
    for key, value in wanted.items():
        if value is None:
            if key in got:
                return False
        elif got.get(key) != str(value):
            return False
    return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Serve canned platform API fixtures")
    parser.add_argument("--fixture", required=True, help="fixture directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8099)
    args = parser.parse_args(argv)
    server = MockPlatformApi(Path(args.fixture), host=args.host, port=args.port)
    print(f"mock platform API serving {args.fixture} at {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
