"""Chat backends: an OpenAI-compatible HTTP client and a scripted replayer."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

log = logging.getLogger(__name__)

BACKEND_KINDS = ("http_chat", "scripted")
BACKEND_ALIASES = {"http": "http_chat", "mock": "scripted"}


class BackendError(RuntimeError):
    pass


class PlaybookExhausted(BackendError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-2024-08-06"
    temperature: float = 0.0
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_retries: int = 2
    script_path: str | None = None

    def __post_init__(self):
        kind = BACKEND_ALIASES.get(self.kind, self.kind)
        if kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend {self.kind!r}; expected one of {BACKEND_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if kind == "scripted" and not self.script_path:
            raise ValueError("scripted backend requires script_path")


class ChatBackend(Protocol):
    def complete(self, prompt: str) -> str:
        ...


class ScriptedBackend:
    """Returns the i-th scripted reply to the i-th request.

    The playbook is a JSON file ``{"replies": ["...", ...]}`` (a bare list
    is accepted too). Asking for more replies than scripted raises
    :class:`PlaybookExhausted`.
    """

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.calls = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        replies = data["replies"] if isinstance(data, dict) else data
        if not all(isinstance(r, str) for r in replies):
            raise BackendError(f"{path}: every scripted reply must be a string")
        return cls(replies)

    def complete(self, prompt: str) -> str:
        if self.calls >= len(self.replies):
            raise PlaybookExhausted(
                f"scripted playbook exhausted after {len(self.replies)} replies"
            )
        reply = self.replies[self.calls]
        self.calls += 1
        return reply


class HttpChatBackend:
    """POSTs ``{model, messages, temperature}`` to ``<endpoint>/chat/completions``."""

    def __init__(self, cfg: BackendConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self.client = client or httpx.Client(timeout=cfg.timeout)
        self.api_key = os.environ.get(cfg.api_key_env, "")

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = self.cfg.endpoint.rstrip("/") + "/chat/completions"
        last: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                resp = self.client.post(url, json=payload, headers=headers)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise BackendError(f"HTTP {resp.status_code} from {url}")
                resp.raise_for_status()
                data = resp.json()
                return data["choices"][0]["message"].get("content") or ""
            except (httpx.TransportError, BackendError) as e:
                last = e
                log.warning("chat request failed (attempt %d): %s", attempt + 1, e)
                if attempt < self.cfg.max_retries:
                    time.sleep(min(2.0 ** attempt, 10.0))
            except (httpx.HTTPStatusError, KeyError, IndexError, ValueError) as e:
                raise BackendError(f"bad chat response from {url}: {e}") from e
        raise BackendError(f"chat request failed after {self.cfg.max_retries + 1} attempts: {last}")


def make_backend(cfg: BackendConfig) -> ChatBackend:
    if cfg.kind == "scripted":
        return ScriptedBackend.from_file(cfg.script_path)
    return HttpChatBackend(cfg)
