"""HTTP adapter for a remote cloud controller.

One fresh connection per request, so concurrent pipelines never share a
socket. Requests are POSTed to ``<base_url>/v1/<endpoint>`` as one line
of canonical JSON.
"""

from __future__ import annotations

import http.client
import logging
import time
from urllib.parse import urlsplit

from audiocascade.backends.protocol import (
    NetworkError,
    ProtocolError,
    decode,
    encode,
    validate_request,
    validate_response,
)

log = logging.getLogger(__name__)

ENDPOINT_ENV = "AUDIOCASCADE_CLOUD_URL"


class RemoteCloudController:
    name = "remote-cloud"

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 2, backoff_s: float = 0.05):
        parts = urlsplit(base_url)
        if parts.scheme not in ("http", "https") or not parts.hostname:
            raise ValueError(f"bad controller URL {base_url!r}")
        self.base_url = base_url.rstrip("/")
        self._scheme = parts.scheme
        self._host = parts.hostname
        self._port = parts.port
        self._prefix = parts.path.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff_s = backoff_s

    def _connection(self) -> http.client.HTTPConnection:
        cls = http.client.HTTPSConnection if self._scheme == "https" else http.client.HTTPConnection
        return cls(self._host, self._port, timeout=self.timeout)

    def post(self, endpoint: str, body: bytes) -> tuple[int, bytes]:
        path = f"{self._prefix}/v1/{endpoint}"
        last_exc = None
        for attempt in range(self.retries + 1):
            conn = self._connection()
            try:
                conn.request("POST", path, body=body, headers={"Content-Type": "application/x-ndjson"})
                resp = conn.getresponse()
                return resp.status, resp.read()
            except (OSError, http.client.HTTPException) as exc:
                last_exc = exc
                log.warning("%s %s failed (attempt %d): %s", endpoint, self.base_url, attempt + 1, exc)
                time.sleep(self.backoff_s * (attempt + 1))
            finally:
                conn.close()
        raise NetworkError(f"{endpoint} to {self.base_url} failed: {last_exc}")

    def call(self, endpoint: str, request: dict) -> dict:
        validate_request(endpoint, request)
        status, data = self.post(endpoint, encode(request))
        message = decode(data)
        if status != 200:
            raise ProtocolError(f"{endpoint} returned HTTP {status}: {message.get('error', '')}")
        validate_response(endpoint, message, request)
        return message
