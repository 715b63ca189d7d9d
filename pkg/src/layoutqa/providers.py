"""Chat-completion and embedding backends, plus deterministic mocks.

The rest of the package only ever sees two callables: ``chat(prompt) -> str``
and ``embed(texts) -> ndarray``. The HTTP clients speak the common
chat-completions / embeddings JSON style; the mocks are fully deterministic
so the pipeline is bit-reproducible offline.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import requests

from .errors import MockScriptError, ProviderError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass
class ProviderConfig:
    """Connection settings for a live backend."""

    base_url: str = "http://localhost:8000/v1"
    model: str = "gpt-4o"
    embedding_model: str = "text-embedding-3-large"
    api_key_env: str = "LAYOUTQA_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    max_parallel: int = 4
    temperature: float = 0.0
    seed: int | None = 0  # sent when the backend supports it; None omits it
    embed_batch_size: int = 128

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "")


class _HttpBase:
    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self._backoff = 0.5

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + endpoint
        headers = {"Content-Type": "application/json"}
        key = self.config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self._backoff * 2 ** (attempt - 1))
            try:
                response = self.session.post(
                    url, json=payload, headers=headers, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                logger.warning("provider call failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"status {response.status_code}"
                logger.warning("provider returned %s (attempt %d)", response.status_code, attempt + 1)
                continue
            if response.status_code != 200:
                raise ProviderError(f"{endpoint} failed with status {response.status_code}: {response.text[:200]}")
            return response.json()
        raise ProviderError(f"{endpoint} failed after {self.config.max_retries + 1} attempts ({last_error})")


class HttpChat(_HttpBase):
    """POST {base_url}/chat/completions; returns the first choice's text."""

    def __call__(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        if self.config.seed is not None:
            payload["seed"] = self.config.seed
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat response: {exc}") from exc


class HttpEmbedder(_HttpBase):
    """POST {base_url}/embeddings; batching is transparent to callers."""

    def __call__(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed requires at least one text")
        rows: list[list[float]] = []
        size = self.config.embed_batch_size
        for i in range(0, len(texts), size):
            batch = texts[i : i + size]
            data = self._post(
                "/embeddings",
                {"model": self.config.embedding_model, "input": batch},
            )
            try:
                items = sorted(data["data"], key=lambda d: d["index"])
                rows.extend(item["embedding"] for item in items)
            except (KeyError, TypeError) as exc:
                raise ProviderError(f"malformed embeddings response: {exc}") from exc
        dims = {len(r) for r in rows}
        if len(dims) != 1:
            raise ProviderError(f"embedding dimension drift within batch: {sorted(dims)}")
        return np.asarray(rows, dtype=np.float32)


@dataclass
class MockRule:
    """First rule whose regex matches the rendered prompt answers it.

    ``response`` may be a canned string, a string with backreferences
    (``expand=True``), or a callable taking the regex match.
    """

    pattern: str
    response: str | Callable
    expand: bool = False
    flags: int = re.S

    def compiled(self) -> re.Pattern:
        return re.compile(self.pattern, self.flags)


class MockChat:
    """Scripted chat provider; raises on any unscripted prompt."""

    def __init__(self, rules: list[MockRule | tuple | dict]):
        self.rules: list[MockRule] = []
        for rule in rules:
            if isinstance(rule, MockRule):
                self.rules.append(rule)
            elif isinstance(rule, dict):
                self.rules.append(
                    MockRule(rule["pattern"], rule["response"], rule.get("expand", False))
                )
            else:
                pattern, response = rule
                self.rules.append(MockRule(pattern, response))
        self._compiled = [(r.compiled(), r) for r in self.rules]
        self.calls: list[str] = []

    def __call__(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        self.calls.append(prompt)
        for pattern, rule in self._compiled:
            match = pattern.search(prompt)
            if match:
                if callable(rule.response):
                    return rule.response(match)
                if rule.expand:
                    return match.expand(rule.response)
                return rule.response
        raise MockScriptError(f"unscripted prompt: {prompt[:160]!r}")


class MockEmbedder:
    """Hash-seeded pseudo-random unit vectors; same text, same vector."""

    def __init__(self, dim: int = 8):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.calls: list[list[str]] = []

    def __call__(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed requires at least one text")
        self.calls.append(list(texts))
        return np.stack([self._vector(t) for t in texts])

    def _vector(self, text: str) -> np.ndarray:
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vector = rng.standard_normal(self.dim).astype(np.float32)
        vector /= np.linalg.norm(vector)
        return vector


@dataclass
class ProviderSet:
    """The three resources every model-touching operation needs."""

    chat: Callable[[str], str]
    embed: Callable[[list[str]], np.ndarray]
    templates: "TemplateStore" = None  # set in __post_init__ to the packaged default

    def __post_init__(self):
        if self.templates is None:
            from .templates import TemplateStore

            self.templates = TemplateStore()
