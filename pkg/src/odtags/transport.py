"""HTTP transport abstraction with offline record/replay support.

The harvester and the term-lookup client both talk HTTP through this
interface so tests can run entirely from canned responses. The real
transport adds retries with exponential backoff and per-host pacing.
"""

from __future__ import annotations

import base64
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol
from urllib.parse import urlsplit

import requests

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2
DEFAULT_HOST_DELAY = 0.1


class TransportError(Exception):
    """Request failed after retries (network error or empty response)."""

    def __init__(self, url: str, message: str, status: int | None = None):
        super().__init__(f"{url}: {message}")
        self.url = url
        self.status = status


@dataclass
class TransportResponse:
    status: int
    body: bytes

    def json(self):
        return json.loads(self.body.decode("utf-8"))

    @property
    def text(self) -> str:
        return self.body.decode("utf-8")


class Transport(Protocol):
    def get(self, url: str) -> TransportResponse: ...


class HttpTransport:
    """requests-backed transport: timeouts, retries, host politeness.

    A failed request is retried ``retries`` times with exponential
    backoff. Successive requests to the same host are spaced at least
    ``host_delay`` seconds apart, regardless of the calling thread.
    """

    def __init__(
        self,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        host_delay: float = DEFAULT_HOST_DELAY,
        backoff: float = 1.0,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.timeout = timeout
        self.retries = retries
        self.host_delay = host_delay
        self.backoff = backoff
        self.session = session or requests.Session()
        self.session.headers.setdefault("User-Agent", "odtags-harvester/0.1")
        self._sleep = sleep
        self._host_lock = threading.Lock()
        self._last_request: dict[str, float] = {}

    def _pace(self, host: str) -> None:
        while True:
            with self._host_lock:
                now = time.monotonic()
                last = self._last_request.get(host)
                if last is None or now - last >= self.host_delay:
                    self._last_request[host] = now
                    return
                wait = self.host_delay - (now - last)
            self._sleep(wait)

    def get(self, url: str) -> TransportResponse:
        host = urlsplit(url).netloc
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                delay = self.backoff * (2 ** (attempt - 1))
                logger.debug("retrying %s in %.1fs", url, delay)
                self._sleep(delay)
            if self.host_delay > 0 and host:
                self._pace(host)
            try:
                resp = self.session.get(url, timeout=self.timeout)
                return TransportResponse(status=resp.status_code, body=resp.content)
            except requests.RequestException as exc:
                last_error = exc
        raise TransportError(url, f"request failed after retries: {last_error}")


@dataclass
class ReplayTransport:
    """Serves canned responses keyed by exact URL and records each call."""

    responses: dict[str, TransportResponse] = field(default_factory=dict)
    calls: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, url: str, body: bytes | str, status: int = 200) -> None:
        if isinstance(body, str):
            body = body.encode("utf-8")
        self.responses[url] = TransportResponse(status=status, body=body)

    def add_json(self, url: str, payload, status: int = 200) -> None:
        self.add(url, json.dumps(payload).encode("utf-8"), status=status)

    def get(self, url: str) -> TransportResponse:
        with self._lock:
            self.calls.append(url)
        try:
            return self.responses[url]
        except KeyError:
            raise TransportError(url, "no recorded response") from None

    def calls_matching(self, fragment: str) -> list[str]:
        with self._lock:
            return [u for u in self.calls if fragment in u]

    @classmethod
    def from_file(cls, path: Path | str) -> "ReplayTransport":
        transport = cls()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                transport.add(
                    record["url"],
                    base64.b64decode(record["body_b64"]),
                    status=record["status"],
                )
        return transport


class RecordingTransport:
    """Pass-through transport that appends every exchange to a replay file."""

    def __init__(self, inner: Transport, path: Path | str):
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def get(self, url: str) -> TransportResponse:
        response = self.inner.get(url)
        record = json.dumps(
            {
                "url": url,
                "status": response.status,
                "body_b64": base64.b64encode(response.body).decode("ascii"),
            }
        )
        with self._lock, open(self.path, "a", encoding="utf-8") as handle:
            handle.write(record + "\n")
        return response
