"""Batched, rate-limited chat-completion client.

All model inference in the package goes through :class:`Gateway`. A backend
is anything with ``complete(messages, params) -> str`` that raises one of the
:class:`GatewayFailure` subclasses on error; :class:`HttpBackend` speaks the
common chat-completions JSON shape and :class:`MockBackend` answers from a
script for offline, reproducible runs.
"""

from __future__ import annotations

import collections
import hashlib
import json
import logging
import math
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import httpx

from .errors import ConfigError, EndpointUnreachable

logger = logging.getLogger(__name__)

Messages = list[dict[str, str]]


@dataclass(frozen=True)
class GenerationParams:
    model_id: str
    temperature: float = 0.5
    max_output_tokens: int = 10
    seed: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ConfigError(f"temperature must be finite and >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ConfigError(f"max_output_tokens must be >= 1, got {self.max_output_tokens}")


@dataclass(frozen=True)
class GatewayConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    api_key_env: str = "PHYTOSUB_API_KEY"
    batch_size: int = 100
    max_retries: int = 3
    rps_cap: float = 10.0
    timeout: float = 60.0
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    jitter: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if not self.rps_cap > 0:
            raise ConfigError("rps_cap must be > 0")


# -- failures -------------------------------------------------------------


class GatewayFailure(Exception):
    kind = "Failure"

    def __init__(self, message: str = "", status: int | None = None):
        super().__init__(message)
        self.status = status


class RateLimited(GatewayFailure):
    kind = "RateLimited"


class RequestTimeout(GatewayFailure):
    kind = "Timeout"


class HttpStatus(GatewayFailure):
    kind = "HttpStatus"


class EmptyResponse(GatewayFailure):
    kind = "EmptyResponse"


class ConnectionFailed(GatewayFailure):
    kind = "Unreachable"


@dataclass(frozen=True)
class Failure:
    kind: str
    message: str = ""
    status: int | None = None

    @classmethod
    def from_exception(cls, exc: GatewayFailure) -> "Failure":
        return cls(exc.kind, str(exc), exc.status)


@dataclass
class ChatExchange:
    correlation_id: int
    prompt: Messages
    response: str | None = None
    failure: Failure | None = None
    attempts: int = 0

    @property
    def ok(self) -> bool:
        return self.response is not None


# -- clocks and throttling ------------------------------------------------


class SystemClock:
    virtual = False

    def now(self) -> float:
        return time.monotonic()

    def sleep_until(self, t: float) -> None:
        delay = t - time.monotonic()
        if delay > 0:
            time.sleep(delay)

    def sleep(self, dt: float) -> None:
        if dt > 0:
            time.sleep(dt)


class VirtualClock:
    """Deterministic clock for tests: sleeping advances time instantly."""

    virtual = True

    def __init__(self, start: float = 0.0):
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def sleep_until(self, t: float) -> None:
        with self._lock:
            self._now = max(self._now, t)

    def sleep(self, dt: float) -> None:
        with self._lock:
            self._now += max(dt, 0.0)


class RateLimiter:
    """Sliding-window throttle.

    Allows at most ``n = max(1, floor(rps))`` dispatches in any window of
    ``n / rps`` seconds; for integral caps that is exactly "no more than
    ``rps`` requests in any one-second window".
    """

    def __init__(self, rps: float, clock):
        self.burst = max(1, math.floor(rps))
        self.window = self.burst / rps
        self.clock = clock
        self._recent: collections.deque[float] = collections.deque(maxlen=self.burst)
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            t = self.clock.now()
            if len(self._recent) == self.burst:
                t = max(t, self._recent[0] + self.window)
            if self._recent:
                t = max(t, self._recent[-1])
            self._recent.append(t)
        self.clock.sleep_until(t)
        return t


# -- backends -------------------------------------------------------------


class Backend(Protocol):
    def complete(self, messages: Messages, params: GenerationParams) -> str: ...


def prompt_hash(messages: Messages) -> str:
    """Stable SHA-256 of a message list; the key used by mock scripts."""
    canon = json.dumps([[m["role"], m["content"]] for m in messages], ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class MockBackend:
    """Scripted backend keyed by :func:`prompt_hash`.

    Script values may be:

    * a string, returned verbatim;
    * a list of strings, one picked per (seed, prompt) with a seeded RNG;
    * ``{"seeds": {"1": "...", ...}, "default": "..."}`` for explicit per-seed answers;
    * ``{"error": "Timeout" | "RateLimited" | "HttpStatus" | "EmptyResponse" | "Unreachable"}``.

    A ``"default"`` top-level key answers any prompt absent from the script;
    without it, unknown prompts fail with ``EmptyResponse``.
    """

    _ERRORS = {c.kind: c for c in (RateLimited, RequestTimeout, HttpStatus, EmptyResponse, ConnectionFailed)}

    def __init__(self, script: Mapping[str, Any], seed: int | None = None):
        self.script = dict(script)
        self.seed = seed
        self.calls: collections.Counter[str] = collections.Counter()
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0

    @classmethod
    def from_file(cls, path: str | Path, seed: int | None = None) -> "MockBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), seed=seed)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Messages, Any]], seed: int | None = None, default: Any = None) -> "MockBackend":
        script: dict[str, Any] = {prompt_hash(m): r for m, r in pairs}
        if default is not None:
            script["default"] = default
        return cls(script, seed=seed)

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    def complete(self, messages: Messages, params: GenerationParams) -> str:
        key = prompt_hash(messages)
        with self._lock:
            self.calls[key] += 1
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
        try:
            seed = params.seed if params.seed is not None else self.seed
            entry = self.script.get(key, self.script.get("default"))
            return self._resolve(entry, key, seed)
        finally:
            with self._lock:
                self._in_flight -= 1

    def _resolve(self, entry: Any, key: str, seed: int | None) -> str:
        if entry is None:
            raise EmptyResponse(f"prompt {key[:12]} not in script")
        if isinstance(entry, str):
            if not entry.strip():
                raise EmptyResponse("scripted empty response")
            return entry
        if isinstance(entry, list):
            rng = random.Random(f"{seed}:{key}")
            return self._resolve(rng.choice(entry), key, seed)
        if isinstance(entry, dict):
            if "error" in entry:
                exc = self._ERRORS.get(entry["error"], HttpStatus)
                raise exc(f"scripted {entry['error']}", entry.get("status"))
            seeds = entry.get("seeds", {})
            if seed is not None and str(seed) in seeds:
                return self._resolve(seeds[str(seed)], key, seed)
            return self._resolve(entry.get("default"), key, seed)
        raise EmptyResponse(f"unusable script entry for {key[:12]}")


def mock_backend(script: Mapping[str, Any], seed: int | None = None) -> MockBackend:
    return MockBackend(script, seed)


class HttpBackend:
    """Client for any endpoint accepting ``{model, messages, temperature, max_tokens}``."""

    def __init__(self, config: GatewayConfig, client: httpx.Client | None = None):
        self.config = config
        key = os.environ.get(config.api_key_env)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=config.timeout)
        self.headers = headers

    def request_body(self, messages: Messages, params: GenerationParams) -> dict:
        body = {
            "model": params.model_id,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed
        return body

    def complete(self, messages: Messages, params: GenerationParams) -> str:
        try:
            resp = self.client.post(self.config.endpoint, json=self.request_body(messages, params), headers=self.headers)
        except httpx.TimeoutException as exc:
            raise RequestTimeout(str(exc)) from None
        except httpx.TransportError as exc:
            raise ConnectionFailed(str(exc)) from None
        if resp.status_code == 429:
            raise RateLimited("HTTP 429", 429)
        if resp.status_code >= 400:
            raise HttpStatus(f"HTTP {resp.status_code}", resp.status_code)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise EmptyResponse("response has no choices[0].message.content") from None
        if not isinstance(content, str) or not content.strip():
            raise EmptyResponse("empty completion")
        return content


# -- gateway --------------------------------------------------------------


@dataclass
class DispatchEvent:
    time: float
    correlation_id: int
    attempt: int
    wave: int


@dataclass
class Gateway:
    """Sends ordered request lists in waves of ``batch_size``.

    Items fail individually; only a batch in which nothing reached the
    endpoint raises :class:`EndpointUnreachable`.
    """

    backend: Backend
    config: GatewayConfig = field(default_factory=GatewayConfig)
    clock: Any = None
    dispatch_log: list[DispatchEvent] = field(default_factory=list)
    waves: int = 0

    def __post_init__(self):
        if self.clock is None:
            self.clock = SystemClock()
        self._limiter = RateLimiter(self.config.rps_cap, self.clock)
        self._log_lock = threading.Lock()
        self._rng = random.Random()

    def _backoff(self, attempt: int) -> float:
        delay = self.config.backoff_base * self.config.backoff_factor ** attempt
        if self.config.jitter and not getattr(self.clock, "virtual", False):
            delay += self._rng.uniform(0, 0.1 * delay)
        return delay

    def _run_one(self, item: ChatExchange, params: GenerationParams, wave: int) -> ChatExchange:
        done = ChatExchange(item.correlation_id, item.prompt)
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self.clock.sleep(self._backoff(attempt - 1))
            t = self._limiter.acquire()
            with self._log_lock:
                self.dispatch_log.append(DispatchEvent(t, item.correlation_id, attempt, wave))
            done.attempts = attempt + 1
            try:
                done.response = self.backend.complete(item.prompt, params)
                done.failure = None
                return done
            except GatewayFailure as exc:
                done.failure = Failure.from_exception(exc)
                logger.debug("item %s attempt %d failed: %s", item.correlation_id, attempt + 1, exc.kind)
        return done

    def complete_batch(self, requests: Sequence[ChatExchange], params: GenerationParams) -> list[ChatExchange]:
        ids = [r.correlation_id for r in requests]
        if len(set(ids)) != len(ids):
            raise ValueError("correlation ids must be unique")
        self.dispatch_log = []
        self.waves = 0
        results: list[ChatExchange] = []
        size = self.config.batch_size
        for start in range(0, len(requests), size):
            wave = requests[start:start + size]
            self.waves += 1
            with ThreadPoolExecutor(max_workers=len(wave)) as pool:
                results.extend(pool.map(lambda r, w=self.waves: self._run_one(r, params, w), wave))
        if results and not any(r.ok for r in results):
            if all(r.failure and r.failure.kind == ConnectionFailed.kind for r in results):
                raise EndpointUnreachable(f"none of {len(results)} requests reached the endpoint")
        return results


def complete_batch(
    requests: Sequence[ChatExchange],
    params: GenerationParams,
    config: GatewayConfig,
    backend: Backend,
    clock=None,
) -> list[ChatExchange]:
    return Gateway(backend, config, clock).complete_batch(requests, params)


def exchanges(prompts: Sequence[Messages], start: int = 0) -> list[ChatExchange]:
    return [ChatExchange(start + i, p) for i, p in enumerate(prompts)]


def with_seed(params: GenerationParams, seed: int | None) -> GenerationParams:
    return replace(params, seed=seed)
