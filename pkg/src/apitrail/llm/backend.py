"""Backend protocol and the remote HTTP implementation.

The remote backend speaks a chat-completion-style HTTP API: one POST per
completion request (``n`` samples in one call) and one POST per embedding
batch. Authentication is a bearer token read from a configurable
environment variable, never stored in config files.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import requests

from ..errors import BackendError, ProtocolError

logger = logging.getLogger(__name__)

# Exponential backoff: 1 s, 2 s, 4 s, ... capped.
BACKOFF_INITIAL_S = 1.0
BACKOFF_CAP_S = 30.0
RETRYABLE_STATUS = (429, 500, 502, 503, 504)


@dataclass
class BackendConfig:
    """Connection and sampling parameters for a completion backend.

    ``temperature``/``top_p`` are the *sampling-stage* defaults; stages that
    are parsed structurally (planning, reranking) override them to 0 per
    request for stability.
    """

    base_url: str = "http://localhost:8000"
    model_name: str = "default-model"
    api_key_env: str = "APITRAIL_API_KEY"
    temperature: float = 0.8
    top_p: float = 0.95
    max_tokens: int = 1024
    request_timeout: float = 60.0
    max_retries: int = 3
    chat_path: str = "/chat/completions"
    embed_path: str = "/embeddings"
    embed_model_name: str = ""
    embed_batch_size: int = 64

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


@dataclass
class ChatRequest:
    """One completion request: ordered messages plus a sample count."""

    messages: list[tuple[str, str]]
    sample_count: int = 1
    temperature: float | None = None
    top_p: float | None = None

    VALID_ROLES = ("system", "user", "assistant")

    def __post_init__(self):
        if not self.messages:
            raise ValueError("ChatRequest needs at least one message")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        for role, _ in self.messages:
            if role not in self.VALID_ROLES:
                raise ValueError(f"invalid message role {role!r}")

    def effective_temperature(self, cfg: BackendConfig) -> float:
        return cfg.temperature if self.temperature is None else self.temperature

    def effective_top_p(self, cfg: BackendConfig) -> float:
        return cfg.top_p if self.top_p is None else self.top_p

    def flat_text(self) -> str:
        """All message contents joined; what mock matchers search in."""
        return "\n".join(content for _, content in self.messages)


class Backend(Protocol):
    """Anything that can complete chats and embed texts."""

    def complete_n(self, req: ChatRequest) -> list[str]:
        """Return exactly ``req.sample_count`` completions, in order."""
        ...

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        """Return one vector per input text as a float64 array (n, d)."""
        ...


@dataclass
class RemoteBackend:
    """HTTP chat-completion backend with retry and backoff.

    ``sleep`` is injectable so the retry schedule is testable without
    waiting out real backoff delays.
    """

    cfg: BackendConfig
    session: requests.Session = field(default_factory=requests.Session)
    sleep: Callable[[float], None] = time.sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_with_retries(self, url: str, payload: dict) -> dict:
        delay = BACKOFF_INITIAL_S
        last_error = "no attempt made"
        for attempt in range(self.cfg.max_retries + 1):
            try:
                resp = self.session.post(
                    url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.cfg.request_timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProtocolError(f"non-JSON response from {url}: {exc}") from exc
                last_error = f"HTTP {resp.status_code}"
                if resp.status_code not in RETRYABLE_STATUS:
                    raise BackendError(f"{url}: {last_error}: {resp.text[:500]}")
            if attempt < self.cfg.max_retries:
                logger.warning("backend request failed (%s), retrying in %.1fs", last_error, delay)
                self.sleep(delay)
                delay = min(delay * 2, BACKOFF_CAP_S)
        raise BackendError(
            f"{url}: giving up after {self.cfg.max_retries} retries ({last_error})"
        )

    def complete_n(self, req: ChatRequest) -> list[str]:
        payload = {
            "model": self.cfg.model_name,
            "messages": [{"role": r, "content": c} for r, c in req.messages],
            "n": req.sample_count,
            "temperature": req.effective_temperature(self.cfg),
            "top_p": req.effective_top_p(self.cfg),
            "max_tokens": self.cfg.max_tokens,
        }
        data = self._post_with_retries(self.cfg.base_url.rstrip("/") + self.cfg.chat_path, payload)
        try:
            choices = data["choices"]
            completions = [c["message"]["content"] for c in choices]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc
        if len(completions) != req.sample_count:
            raise ProtocolError(
                f"asked for {req.sample_count} completions, got {len(completions)}"
            )
        return completions

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed_texts requires at least one text")
        vectors: list[list[float]] = []
        model = self.cfg.embed_model_name or self.cfg.model_name
        url = self.cfg.base_url.rstrip("/") + self.cfg.embed_path
        for start in range(0, len(texts), self.cfg.embed_batch_size):
            batch = texts[start : start + self.cfg.embed_batch_size]
            data = self._post_with_retries(url, {"model": model, "input": batch})
            try:
                rows = [item["embedding"] for item in data["data"]]
            except (KeyError, TypeError) as exc:
                raise ProtocolError(f"malformed embedding response: {exc}") from exc
            if len(rows) != len(batch):
                raise ProtocolError(f"asked for {len(batch)} embeddings, got {len(rows)}")
            vectors.extend(rows)
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise ProtocolError(f"backend returned mixed embedding dimensions: {sorted(dims)}")
        return np.asarray(vectors, dtype=np.float64)
