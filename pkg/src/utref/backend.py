"""Chat-completion client and offline stub backends.

The HTTP client speaks the common JSON chat-completion shape (see
``docs/backend-wire.md``). It retries transport failures, 5xx and 429
responses with exponential backoff, never retries authentication failures,
and caps in-flight requests per configuration with a semaphore.
"""

from __future__ import annotations

import json
import logging
import os
import random
import socket
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import AuthError, BackendUnavailable, HttpError, RateLimited, Timeout

log = logging.getLogger(__name__)

ENV_ENDPOINT = "UTREF_ENDPOINT"
ENV_MODEL = "UTREF_MODEL"
ENV_API_KEY = "UTREF_API_KEY"


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    model_name: str
    api_key: str = field(default="", repr=False)
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 2
    max_concurrency: int = 4
    backoff_base: float = 0.5

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")

    @classmethod
    def from_env(cls, environ=None, **overrides) -> "BackendConfig":
        env = os.environ if environ is None else environ
        endpoint = overrides.pop("endpoint_url", None) or env.get(ENV_ENDPOINT)
        model = overrides.pop("model_name", None) or env.get(ENV_MODEL)
        if not endpoint or not model:
            raise BackendUnavailable(f"set {ENV_ENDPOINT} and {ENV_MODEL} to use the model backend")
        key = overrides.pop("api_key", None) or env.get(ENV_API_KEY, "")
        return cls(endpoint, model, key, **overrides)

    def public_dict(self) -> dict:
        """Settings safe to persist (no key)."""
        return {
            "endpoint_url": self.endpoint_url,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "max_concurrency": self.max_concurrency,
        }


@dataclass(frozen=True)
class ModelResponse:
    text: str
    token_usage: dict | None = None
    latency: float = 0.0


def request_body(messages: list[dict], config: BackendConfig) -> dict:
    return {"model": config.model_name, "messages": messages, "temperature": config.temperature}


def parse_response_body(raw: bytes) -> tuple[str, dict | None]:
    try:
        doc = json.loads(raw.decode("utf-8"))
        text = doc["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise HttpError(200, f"malformed completion body ({type(exc).__name__})") from None
    if not isinstance(text, str):
        raise HttpError(200, "completion content is not text")
    return text, doc.get("usage")


class ChatClient:
    """Thread-safe chat-completion client bound to one configuration."""

    def __init__(self, config: BackendConfig, *, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._sleep = sleep

    def _headers(self) -> dict:
        h = {"Content-Type": "application/json", "Accept": "application/json"}
        if self.config.api_key:
            h["Authorization"] = f"Bearer {self.config.api_key}"
        return h

    def _once(self, payload: bytes) -> tuple[str, dict | None]:
        req = urllib.request.Request(self.config.endpoint_url, data=payload, headers=self._headers(), method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                return parse_response_body(resp.read())
        except urllib.error.HTTPError as exc:
            reason = exc.reason if isinstance(exc.reason, str) else ""
            if exc.code in (401, 403):
                raise AuthError(exc.code, reason) from None
            if exc.code == 429:
                raise RateLimited(reason) from None
            raise HttpError(exc.code, reason) from None
        except (socket.timeout, TimeoutError) as exc:
            raise Timeout(f"no response within {self.config.timeout}s") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise Timeout(f"no response within {self.config.timeout}s") from None
            raise HttpError(None, str(exc.reason)) from None
        except (ConnectionError, OSError) as exc:
            raise HttpError(None, type(exc).__name__) from None

    @staticmethod
    def _retryable(exc: Exception) -> bool:
        if isinstance(exc, AuthError):
            return False
        if isinstance(exc, (Timeout, RateLimited)):
            return True
        if isinstance(exc, HttpError):
            return exc.status is None or exc.status >= 500
        return False

    def chat(self, messages: list[dict]) -> ModelResponse:
        payload = json.dumps(request_body(messages, self.config)).encode("utf-8")
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            start = time.monotonic()
            try:
                with self._slots:
                    text, usage = self._once(payload)
                return ModelResponse(text, usage, time.monotonic() - start)
            except (HttpError, Timeout) as exc:
                if not self._retryable(exc) or attempt == attempts - 1:
                    raise
                delay = self.config.backoff_base * (2 ** attempt) * (1 + random.random() * 0.1)
                log.info("request failed (%s), retry %d/%d in %.2fs",
                         type(exc).__name__, attempt + 1, self.config.max_retries, delay)
                self._sleep(delay)
        raise AssertionError("unreachable")

    def complete(self, bundle) -> ModelResponse:
        return self.chat(bundle.messages())


_CLIENTS: dict[BackendConfig, ChatClient] = {}
_CLIENTS_LOCK = threading.Lock()


def client_for(config: BackendConfig) -> ChatClient:
    with _CLIENTS_LOCK:
        c = _CLIENTS.get(config)
        if c is None:
            c = _CLIENTS[config] = ChatClient(config)
        return c


def complete(bundle, config: BackendConfig) -> ModelResponse:
    """One chat completion for ``bundle``; clients are shared per configuration."""
    return client_for(config).complete(bundle)


# --------------------------------------------------------------------------
# Stubs
# --------------------------------------------------------------------------

class EchoBackend:
    """Returns the test code it was given, unchanged."""

    def complete(self, bundle) -> ModelResponse:
        return ModelResponse(bundle.test_code)


class ScriptedBackend:
    """Replays canned responses in order; the last one repeats once exhausted."""

    def __init__(self, responses: Iterable):
        items = []
        for r in responses:
            p = Path(r) if not isinstance(r, str) or "\n" not in r else None
            items.append(p.read_text(encoding="utf-8") if p is not None and p.is_file() else str(r))
        if not items:
            raise ValueError("scripted backend needs at least one response")
        self._items = items
        self._next = 0
        self._lock = threading.Lock()

    @classmethod
    def from_dir(cls, directory) -> "ScriptedBackend":
        return cls(sorted(str(p) for p in Path(directory).iterdir() if p.is_file()))

    def complete(self, bundle) -> ModelResponse:
        with self._lock:
            text = self._items[min(self._next, len(self._items) - 1)]
            self._next += 1
        return ModelResponse(text)


class CleanOracleBackend:
    """Runs the deterministic engine and answers as a model would."""

    def __init__(self, config=None, ruleset=None):
        self.config = config
        self.ruleset = ruleset

    def complete(self, bundle) -> ModelResponse:
        from .engine import refactor_unit
        from .model import render
        from .smells import detect

        unit, ctx = bundle.unit, bundle.context
        findings = detect(unit, ctx, self.config)
        if findings:
            out = refactor_unit(unit, ctx, findings, self.ruleset, "deterministic", config=self.config)
            unit = out.unit
        answers = "\n".join(f"{k}. no" for k in range(1, len(bundle.checkpoints) + 1))
        return ModelResponse("```java\n" + render(unit) + "```\n" + answers + "\n")


def make_stub(kind: str, *args, **kwargs):
    kinds = {"echo": EchoBackend, "scripted": ScriptedBackend, "clean-oracle": CleanOracleBackend}
    try:
        return kinds[kind](*args, **kwargs)
    except KeyError:
        raise ValueError(f"unknown stub kind {kind!r}; expected one of {sorted(kinds)}") from None
