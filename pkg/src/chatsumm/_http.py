"""Minimal JSON-over-HTTP client with timeout and retry."""

from __future__ import annotations

import json
import logging
import socket
import time
import urllib.error
import urllib.request
from typing import Any

from .errors import ProtocolError, RemoteTimeout

logger = logging.getLogger(__name__)


def encode_body(payload: Any) -> bytes:
    # sorted keys keep request bodies byte-stable for identical inputs
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def post_json(url: str, payload: Any, timeout: float = 10.0, retries: int = 0, backoff: float = 0.05) -> Any:
    """POST ``payload`` as JSON and return the decoded JSON response.

    Transport failures and 5xx responses are retried up to ``retries`` extra
    times.  Raises :class:`RemoteTimeout` when the final attempt times out or
    cannot connect, and :class:`ProtocolError` for non-2xx statuses or bodies
    that are not valid JSON.
    """
    body = encode_body(payload)
    last_exc: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * attempt)
        req = urllib.request.Request(url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                raw = resp.read().decode("utf-8", errors="replace")
                status = resp.status
        except urllib.error.HTTPError as exc:
            text = exc.read().decode("utf-8", errors="replace")
            last_exc = ProtocolError(exc.code, text)
            if exc.code >= 500:
                logger.debug("POST %s -> %s (attempt %d)", url, exc.code, attempt + 1)
                continue
            raise last_exc from None
        except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
            last_exc = RemoteTimeout(f"POST {url} failed: {exc}")
            logger.debug("POST %s transport failure (attempt %d): %s", url, attempt + 1, exc)
            continue
        if not 200 <= status < 300:
            raise ProtocolError(status, raw)
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            raise ProtocolError(status, raw) from None
    assert last_exc is not None
    raise last_exc
