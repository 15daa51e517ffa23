"""Wire adapter to an external inference service, plus a reference server.

Protocol: ``POST /predict`` with ``{"texts": [...]}``; the service answers
``{"results": [{"code": int, "probs": [7 floats]}, ...]}``. The adapter
validates every vector (sums to 1 within 1e-6, code in 0..6) so a broken
service cannot silently poison the corpus predictions.
"""
from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import requests

from .errors import ProtocolError, RemoteFailure, RemoteTimeout
from .labels import NUM_CLASSES, VALID_CODES

logger = logging.getLogger(__name__)

PROB_SUM_TOLERANCE = 1e-6


class RemoteClassifier:
    """Batched client for the /predict endpoint; satisfies the same
    predict contract as the in-repo model."""

    def __init__(
        self,
        endpoint: str,
        batch_size: int = 32,
        timeout: float = 10.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.session = session or requests.Session()

    def predict_texts(self, texts: list[str]) -> list[tuple[int, np.ndarray]]:
        if not texts:
            return []
        results: list[tuple[int, np.ndarray]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            results.extend(self._predict_batch(batch))
        return results

    def _predict_batch(self, texts: list[str]) -> list[tuple[int, np.ndarray]]:
        url = f"{self.endpoint}/predict"
        try:
            resp = self.session.post(
                url,
                json={"texts": texts},
                timeout=self.timeout,
                headers={"Content-Type": "application/json"},
            )
        except requests.Timeout as exc:
            raise RemoteTimeout(f"{url}: {exc}")
        except requests.ConnectionError as exc:
            raise RemoteFailure(f"{url}: {exc}")
        if not 200 <= resp.status_code < 300:
            raise RemoteFailure(f"{url}: HTTP {resp.status_code}")
        return _parse_results(resp.text, expected=len(texts))


def _parse_results(payload_text: str, expected: int) -> list[tuple[int, np.ndarray]]:
    excerpt = payload_text[:200]
    try:
        payload = json.loads(payload_text)
    except json.JSONDecodeError:
        raise ProtocolError("response is not JSON", payload_excerpt=excerpt)
    results = payload.get("results")
    if not isinstance(results, list) or len(results) != expected:
        raise ProtocolError(
            f"expected {expected} results, got {type(results).__name__}",
            payload_excerpt=excerpt,
        )
    out: list[tuple[int, np.ndarray]] = []
    for i, item in enumerate(results):
        try:
            code = int(item["code"])
            probs = np.asarray(item["probs"], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise ProtocolError(f"result {i} is malformed", payload_excerpt=excerpt)
        if code not in VALID_CODES:
            raise ProtocolError(f"result {i} code {code} outside 0..6", payload_excerpt=excerpt)
        if probs.shape != (NUM_CLASSES,):
            raise ProtocolError(
                f"result {i} has {probs.size} probabilities", payload_excerpt=excerpt
            )
        if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOLERANCE:
            raise ProtocolError(
                f"result {i} probabilities sum to {float(probs.sum()):.6f}",
                payload_excerpt=excerpt,
            )
        out.append((code, probs))
    return out


class LocalClassifier:
    """The in-repo model behind the same predict_texts surface."""

    def __init__(self, model):
        self.model = model

    def predict_texts(self, texts: list[str]) -> list[tuple[int, np.ndarray]]:
        from .classifier import predict

        return [predict(self.model, text) for text in texts]


class InferenceServer:
    """Serves a model over the /predict wire protocol (reference
    implementation; also the mock remote in the substitution tests)."""

    def __init__(self, classifier, host: str = "127.0.0.1", port: int = 0):
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                logger.debug(fmt % args)

            def do_POST(self):
                if self.path != "/predict":
                    self._reply(404, {"error": "NotFound"})
                    return
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                    texts = body["texts"]
                except Exception:
                    self._reply(400, {"error": "BadRequest"})
                    return
                results = [
                    {"code": int(code), "probs": [float(p) for p in probs]}
                    for code, probs in server.classifier.predict_texts(list(texts))
                ]
                self._reply(200, {"results": results})

            def _reply(self, status: int, obj) -> None:
                body = json.dumps(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self.classifier = classifier
        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[0], self.httpd.server_address[1]
        return f"http://{host}:{port}"

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def remote_predict(endpoint: str, texts: list[str], batch_size: int = 32, timeout: float = 10.0):
    """One-shot convenience over RemoteClassifier."""
    return RemoteClassifier(endpoint, batch_size=batch_size, timeout=timeout).predict_texts(texts)
