"""Minimal chat-completion HTTP client for the pluggable LLM/MLLM backends.

The engine works fully offline with its deterministic backends; these
clients are only used when an external endpoint is configured (env
REMONI_LLM_URL / REMONI_LLM_KEY for text, REMONI_MLLM_URL / REMONI_MLLM_KEY
for vision). One retry, 30 s timeout, shared token-bucket rate limit.
"""

from __future__ import annotations

import base64
import os
import threading
import time
from typing import Optional

import httpx

from ..errors import RemoniError

ENV_LLM_URL = "REMONI_LLM_URL"
ENV_LLM_KEY = "REMONI_LLM_KEY"
ENV_MLLM_URL = "REMONI_MLLM_URL"
ENV_MLLM_KEY = "REMONI_MLLM_KEY"

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_RATE_PER_S = 5.0


class LlmUnavailable(RemoniError):
    pass


class MllmUnavailable(RemoniError):
    pass


class TokenBucket:
    """Simple blocking rate limiter shared by all external clients."""

    def __init__(self, rate_per_s: float = DEFAULT_RATE_PER_S, capacity: float | None = None):
        self.rate = rate_per_s
        self.capacity = capacity if capacity is not None else rate_per_s
        self._tokens = self.capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


_shared_bucket = TokenBucket()


class ChatClient:
    """POSTs {"model", "messages"} to the configured URL and returns the
    first choice's message content."""

    def __init__(
        self,
        url: str,
        api_key: str = "",
        model: str = "default",
        timeout_s: float = DEFAULT_TIMEOUT_S,
        bucket: TokenBucket | None = None,
        unavailable_error=LlmUnavailable,
    ):
        self.url = url
        self.api_key = api_key
        self.model = model
        self.timeout_s = timeout_s
        self.bucket = bucket or _shared_bucket
        self._error = unavailable_error

    def complete(
        self,
        system: str,
        user: str,
        image: Optional[bytes] = None,
        mime: str = "image/png",
    ) -> str:
        content: object = user
        if image is not None:
            data_url = f"data:{mime};base64,{base64.b64encode(image).decode('ascii')}"
            content = [
                {"type": "text", "text": user},
                {"type": "image_url", "image_url": {"url": data_url}},
            ]
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for _ in range(2):  # one retry
            self.bucket.acquire()
            try:
                resp = httpx.post(self.url, json=body, headers=headers, timeout=self.timeout_s)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as e:
                last_error = e
        raise self._error(f"model endpoint {self.url} failed: {last_error}")


def llm_client_from_env() -> Optional[ChatClient]:
    url = os.environ.get(ENV_LLM_URL)
    if not url:
        return None
    return ChatClient(url, os.environ.get(ENV_LLM_KEY, ""), unavailable_error=LlmUnavailable)


def mllm_client_from_env() -> Optional[ChatClient]:
    url = os.environ.get(ENV_MLLM_URL)
    if not url:
        return None
    return ChatClient(url, os.environ.get(ENV_MLLM_KEY, ""), unavailable_error=MllmUnavailable)
