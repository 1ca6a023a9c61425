"""Fixture-backed HTTP server speaking the cloud-controller wire protocol.

Every received request body is kept verbatim (and optionally appended to a
capture file) so privacy audits can run on the actual bytes that crossed
the wire.
"""

from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Iterator, Optional

from audiocascade.backends.protocol import (
    ENDPOINTS,
    ProtocolError,
    decode,
    encode,
    error_message,
    validate_request,
)
from audiocascade.backends.scripted import FixtureMiss, ScriptedCloud, ScriptedFixture

log = logging.getLogger(__name__)


class MockCloudServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, fixture: ScriptedFixture, capture_path: Optional[str] = None):
        # the base constructor calls server_close() if binding fails
        self._capture = None
        super().__init__(address, _Handler)
        self.cloud = ScriptedCloud(fixture)
        self.captured: list[bytes] = []
        self._lock = threading.Lock()
        self._capture = open(capture_path, "ab") if capture_path else None

    def record(self, body: bytes) -> None:
        with self._lock:
            self.captured.append(body)
            if self._capture:
                self._capture.write(body if body.endswith(b"\n") else body + b"\n")
                self._capture.flush()

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def server_close(self):
        super().server_close()
        if self._capture:
            self._capture.close()


class _Handler(BaseHTTPRequestHandler):
    server: MockCloudServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("mock-cloud: " + fmt, *args)

    def _reply(self, status: int, message: dict) -> None:
        body = encode(message)
        self.send_response(status)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        self.server.record(body)
        parts = self.path.strip("/").split("/")
        if len(parts) != 2 or parts[0] != "v1" or parts[1] not in ENDPOINTS:
            self._reply(404, error_message(f"no endpoint {self.path}", "not_found"))
            return
        endpoint = parts[1]
        try:
            request = decode(body)
            validate_request(endpoint, request)
            response = self.server.cloud.handle(endpoint, request)
        except FixtureMiss as exc:
            self._reply(404, error_message(str(exc), "unknown_sample"))
        except ProtocolError as exc:
            self._reply(400, error_message(str(exc), "protocol"))
        else:
            self._reply(200, response)

    def do_GET(self):
        if self.path == "/healthz":
            self._reply(200, {"v": 1, "status": "ok"})
        else:
            self._reply(404, error_message(f"no resource {self.path}", "not_found"))


def serve(fixture: ScriptedFixture, host: str = "127.0.0.1", port: int = 0,
          capture_path: Optional[str] = None) -> MockCloudServer:
    """Bind the server; the caller runs ``serve_forever`` (or a thread)."""
    return MockCloudServer((host, port), fixture, capture_path)


@contextmanager
def running(fixture: ScriptedFixture, host: str = "127.0.0.1", port: int = 0,
            capture_path: Optional[str] = None) -> Iterator[MockCloudServer]:
    """Run a mock cloud on a background thread for the duration of the block."""
    server = serve(fixture, host, port, capture_path)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
