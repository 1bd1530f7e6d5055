"""Chat-completions HTTP transport shared by the VLM and LLM clients."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, replace

import httpx

from .errors import TransportError

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ClientConfig:
    """Where and how to reach an OpenAI-style ``/chat/completions`` endpoint."""

    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = ""
    api_key_env: str = "NEUSV_API_KEY"
    timeout: float = 60.0
    parallelism: int = 4
    max_frames: int = 3
    attempts: int = 3
    backoff: float = 0.5
    max_tokens: int = 512
    top_logprobs: int = 5

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None

    def with_overrides(self, **kw) -> "ClientConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


class ChatTransport:
    def __init__(self, config: ClientConfig, http: httpx.Client | None = None, sleep=time.sleep):
        self.config = config
        self._http = http
        self._sleep = sleep

    @property
    def http(self) -> httpx.Client:
        if self._http is None:
            self._http = httpx.Client(timeout=self.config.timeout)
        return self._http

    def post(self, payload: dict) -> dict:
        """POST with retries on network errors and retryable status codes."""
        headers = {"Content-Type": "application/json"}
        key = self.config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last = None
        for attempt in range(self.config.attempts):
            if attempt:
                self._sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self.http.post(self.config.endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("request to %s failed (%s), attempt %d", self.config.endpoint, last, attempt + 1)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = f"HTTP {resp.status_code}"
                log.warning("request to %s returned %s, attempt %d", self.config.endpoint, last, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise TransportError(f"response is not JSON: {exc}") from None
        raise TransportError(f"giving up after {self.config.attempts} attempts: {last}")

    def chat(self, messages: list[dict], **extra) -> dict:
        payload = {"model": self.config.model, "messages": messages, "temperature": 0,
                   "max_tokens": self.config.max_tokens}
        payload.update(extra)
        data = self.post(payload)
        try:
            return data["choices"][0]
        except (KeyError, IndexError, TypeError):
            raise TransportError("response has no choices") from None
