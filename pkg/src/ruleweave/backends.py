"""Chat backends: a live HTTP client, a scripted replay store, and a recorder.

Every backend answers ``complete(request)`` with the raw response text plus a
parsed JSON payload when the text contains one. The scripted backend is the
workhorse for tests and fixtures; it maps ``(instance_id, step)`` to a canned
response and never touches the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Optional, Protocol

from .errors import BackendError

log = logging.getLogger(__name__)

API_KEY_ENV = "RULEWEAVE_API_KEY"
DEFAULT_TIMEOUT = 120.0
RETRYABLE_ATTEMPTS = 3


@dataclass(frozen=True)
class ChatRequest:
    """One structured-output request to a model."""

    system: str
    user: str
    response_schema: dict
    model: str
    instance_id: str
    step: str
    temperature: float = 0.0

    def __post_init__(self):
        if not self.response_schema:
            raise BackendError("response_schema must be non-empty")

    def digest(self) -> str:
        payload = json.dumps(
            {
                "system": self.system,
                "user": self.user,
                "response_schema": self.response_schema,
                "model": self.model,
                "instance_id": self.instance_id,
                "step": self.step,
                "temperature": self.temperature,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BackendResponse:
    text: str
    data: object = None


def parse_json_payload(text: str):
    """Best-effort JSON extraction; returns None when nothing parses."""
    candidates = [text.strip()]
    stripped = text.strip()
    if stripped.startswith("```"):
        body = stripped.strip("`")
        if body.startswith("json"):
            body = body[4:]
        candidates.append(body.strip())
    start, end = text.find("{"), text.rfind("}")
    if 0 <= start < end:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            return json.loads(candidate)
        except (json.JSONDecodeError, ValueError):
            continue
    return None


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> BackendResponse: ...


class ScriptedBackend:
    """Immutable map from (instance_id, step) to a canned response text.

    Repair steps fall back to the base step when no dedicated repair entry
    exists, so a well-formed fixture does not need one entry per retry.
    """

    def __init__(self, responses: dict[tuple[str, str], str]):
        self._responses = dict(responses)

    @classmethod
    def from_records(cls, records) -> "ScriptedBackend":
        responses: dict[tuple[str, str], str] = {}
        for i, record in enumerate(records):
            if not isinstance(record, dict) or not {"instance_id", "step", "response"} <= set(record):
                raise BackendError(f"replay record {i} needs instance_id, step, response")
            key = (record["instance_id"], record["step"])
            if key in responses:
                raise BackendError(f"duplicate replay entry for {key}")
            if not isinstance(record["response"], str):
                raise BackendError(f"replay record {i}: response must be a string")
            responses[key] = record["response"]
        return cls(responses)

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        try:
            with open(path, encoding="utf-8") as handle:
                records = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"cannot load replay file {path}: {exc}") from exc
        if not isinstance(records, list):
            raise BackendError(f"replay file {path} must hold a JSON array")
        return cls.from_records(records)

    def complete(self, request: ChatRequest) -> BackendResponse:
        key = (request.instance_id, request.step)
        text = self._responses.get(key)
        if text is None and request.step.endswith("_repair"):
            text = self._responses.get((request.instance_id, request.step[: -len("_repair")]))
        if text is None:
            raise BackendError(f"no scripted response for {key}")
        return BackendResponse(text=text, data=parse_json_payload(text))


class RecordingBackend:
    """Wraps a live backend and keeps every exchange for later replay."""

    def __init__(self, inner: Backend):
        self._inner = inner
        self._records: list[dict] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> BackendResponse:
        response = self._inner.complete(request)
        with self._lock:
            self._records.append(
                {
                    "instance_id": request.instance_id,
                    "step": request.step,
                    "response": response.text,
                }
            )
        return response

    def save(self, path) -> None:
        with self._lock:
            merged: dict[tuple[str, str], dict] = {}
            for record in self._records:
                merged[(record["instance_id"], record["step"])] = record
        records = [merged[key] for key in sorted(merged)]
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(records, handle, indent=2, ensure_ascii=False)
            handle.write("\n")


class _RateLimiter:
    """Simple sliding-window requests-per-minute gate."""

    def __init__(self, rpm: Optional[int]):
        self.rpm = rpm
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.rpm:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                while self._stamps and now - self._stamps[0] >= 60.0:
                    self._stamps.popleft()
                if len(self._stamps) < self.rpm:
                    self._stamps.append(now)
                    return
                delay = 60.0 - (now - self._stamps[0])
            time.sleep(max(delay, 0.05))


class HttpBackend:
    """Client for a chat-completions-compatible JSON endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT,
        max_concurrency: int = 4,
        rpm: Optional[int] = None,
    ):
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not key:
            raise BackendError(f"no API key: set {API_KEY_ENV} or pass api_key")
        if not endpoint:
            raise BackendError("endpoint must be set for the HTTP backend")
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._api_key = key
        self._semaphore = threading.BoundedSemaphore(max(1, max_concurrency))
        self._limiter = _RateLimiter(rpm)

    def complete(self, request: ChatRequest) -> BackendResponse:
        import requests

        body = {
            "model": request.model or self.model,
            "temperature": request.temperature,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        headers = {
            "Authorization": f"Bearer {self._api_key}",
            "Content-Type": "application/json",
        }
        last_error = "unknown"
        for attempt in range(RETRYABLE_ATTEMPTS):
            self._limiter.wait()
            with self._semaphore:
                try:
                    reply = requests.post(
                        self.endpoint, json=body, headers=headers, timeout=self.timeout
                    )
                except requests.RequestException as exc:
                    raise BackendError(f"request to {self.endpoint} failed: {exc}") from exc
            if reply.status_code == 429 or reply.status_code >= 500:
                last_error = f"HTTP {reply.status_code}"
                log.warning("retryable %s from %s (attempt %d)", last_error, self.endpoint, attempt + 1)
                time.sleep(2.0**attempt)
                continue
            if reply.status_code != 200:
                raise BackendError(f"HTTP {reply.status_code} from {self.endpoint}: {reply.text[:500]}")
            try:
                payload = reply.json()
                text = payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"unexpected response shape from {self.endpoint}: {exc}") from exc
            return BackendResponse(text=text, data=parse_json_payload(text))
        raise BackendError(f"gave up after {RETRYABLE_ATTEMPTS} attempts ({last_error})")
