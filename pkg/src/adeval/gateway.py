"""Provider-neutral LLM access: transport retries, JSON coercion, embeddings.

All model traffic in the package goes through Gateway so that retry budgets,
concurrency limits, and output validation behave identically everywhere.
Temperature is pinned to 0.0; reproducibility is a package-wide contract.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import numpy as np
import requests as _requests
from jsonschema import Draft202012Validator

from .errors import SchemaError, TransportError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProviderConfig:
    """Connection and policy settings for one provider.

    retry_budget is the number of re-attempts after the first try, so a
    budget of 1 means at most 2 transport calls per request. The API key is
    looked up from the named environment variable at call time, never stored.
    """

    endpoint: str = ""
    model: str = "mock"
    embed_model: str = "mock-embed"
    api_key_env: str = "ADEVAL_API_KEY"
    temperature: float = 0.0
    max_in_flight: int = 4
    retry_budget: int = 1
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if self.temperature != 0.0:
            raise ValueError("temperature must be 0.0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_budget < 1:
            raise ValueError("retry_budget must be >= 1")


class Provider(Protocol):
    def complete_text(self, prompt: str) -> str: ...

    def embed_raw(self, texts: Sequence[str]) -> list[list[float]]: ...


# ---------------------------------------------------------------------------
# Providers


class HttpProvider:
    """OpenAI-style HTTP backend (/chat/completions and /embeddings).

    The HTTP POST is injectable so transport failures can be simulated
    without a network.
    """

    def __init__(
        self,
        config: ProviderConfig,
        post: Callable[..., tuple[int, Any]] | None = None,
    ) -> None:
        self.config = config
        self._post = post if post is not None else self._requests_post

    def _requests_post(self, url: str, headers: dict, body: dict, timeout: float):
        resp = _requests.post(url, headers=headers, json=body, timeout=timeout)
        try:
            payload = resp.json()
        except ValueError:
            payload = None
        return resp.status_code, payload

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise TransportError(
                f"environment variable {self.config.api_key_env} is not set"
            )
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _call(self, path: str, body: dict) -> Any:
        url = self.config.endpoint.rstrip("/") + path
        try:
            status, payload = self._post(url, self._headers(), body, self.config.timeout_s)
        except TransportError:
            raise
        except Exception as exc:
            raise TransportError(f"network failure: {exc}", retryable=True) from exc
        if status == 429 or status >= 500:
            raise TransportError(f"HTTP {status}", retryable=True)
        if status != 200:
            raise TransportError(f"HTTP {status}")
        if payload is None:
            raise TransportError("non-JSON response body")
        return payload

    def complete_text(self, prompt: str) -> str:
        payload = self._call(
            "/chat/completions",
            {
                "model": self.config.model,
                "temperature": self.config.temperature,
                "messages": [{"role": "user", "content": prompt}],
            },
        )
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc

    def embed_raw(self, texts: Sequence[str]) -> list[list[float]]:
        payload = self._call(
            "/embeddings", {"model": self.config.embed_model, "input": list(texts)}
        )
        try:
            rows = sorted(payload["data"], key=lambda d: d["index"])
            return [list(map(float, r["embedding"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"malformed embedding payload: {exc}") from exc


class MockProvider:
    """Deterministic in-memory backend for tests and offline runs.

    Completion lookup order for a prompt: exact key, longest substring key,
    sha256-hex key, then the "default" key. A value may be a string, a list
    of strings consumed one per call (the last repeats), an exception to
    raise, or a callable of the prompt. Embeddings are hash-seeded gaussian
    vectors, so identical text always embeds identically.
    """

    EMBED_DIM = 64

    def __init__(self, responses: dict[str, Any] | None = None) -> None:
        self._responses = dict(responses or {})
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()
        self.prompts: list[str] = []

    def _lookup(self, prompt: str) -> tuple[str, Any] | None:
        if prompt in self._responses:
            return prompt, self._responses[prompt]
        subs = [k for k in self._responses if k != "default" and k in prompt]
        if subs:
            key = max(subs, key=len)
            return key, self._responses[key]
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        if digest in self._responses:
            return digest, self._responses[digest]
        if "default" in self._responses:
            return "default", self._responses["default"]
        return None

    def complete_text(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
            hit = self._lookup(prompt)
            if hit is None:
                raise TransportError("no scripted response for prompt")
            key, value = hit
            if isinstance(value, list):
                if not value:
                    raise TransportError(f"empty response list for key {key!r}")
                pos = self._cursor.get(key, 0)
                self._cursor[key] = pos + 1
                value = value[min(pos, len(value) - 1)]
        if isinstance(value, BaseException):
            raise value
        if callable(value):
            return str(value(prompt))
        return str(value)

    def embed_raw(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            seed = int.from_bytes(
                hashlib.sha256(text.encode("utf-8")).digest()[:8], "big"
            )
            rng = np.random.default_rng(seed)
            out.append(rng.normal(size=self.EMBED_DIM).tolist())
        return out


# ---------------------------------------------------------------------------
# JSON coercion

_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_-]+)?\s*(.*?)```", re.DOTALL)
_ENUM_LINE_RE = re.compile(r"^\s*(?:[-*]\s*|\d+\s*[.)]\s*)?(.*?)\s*$")


def extract_json(text: str) -> Any | None:
    """Pull the first JSON container out of free-form model text.

    Tries the whole string, then fenced code blocks, then a raw scan from
    each brace/bracket. Returns None when nothing decodes.
    """
    candidates = [text.strip()]
    candidates.extend(m.group(1).strip() for m in _FENCE_RE.finditer(text))
    for cand in candidates:
        try:
            value = json.loads(cand)
        except ValueError:
            continue
        if isinstance(value, (list, dict)):
            return value
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch not in "[{":
            continue
        try:
            value, _ = decoder.raw_decode(text[i:])
        except ValueError:
            continue
        if isinstance(value, (list, dict)):
            return value
    return None


def _is_string_array_shape(shape: dict) -> bool:
    items = shape.get("items")
    return shape.get("type") == "array" and isinstance(items, dict) and items.get(
        "type"
    ) == "string"


def _lines_fallback(text: str) -> list[str]:
    """Read an enumerated line list ("1. AD", "- dialogue") as a string array."""
    out = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        m = _ENUM_LINE_RE.match(raw)
        item = m.group(1) if m else raw.strip()
        out.append(item.strip().strip('"').strip("'"))
    return out


def shape_errors(value: Any, shape: dict) -> list[str]:
    validator = Draft202012Validator(shape)
    return [e.message for e in validator.iter_errors(value)]


_REPAIR_WRAPPER = """\
Your previous reply could not be used because it did not match the required JSON shape.

Required JSON Schema:
{schema}

Problem:
{problem}

Previous reply:
{reply}

Return only the corrected JSON, with no commentary and no code fences.
"""


# ---------------------------------------------------------------------------
# Gateway


class Gateway:
    """Single entry point for completions and embeddings.

    Each logical request makes at most (1 + retry_budget) transport attempts,
    and at most one extra repair round-trip when shaped output fails to
    validate, so total provider calls are bounded by
    inputs x (1 + retry_budget) x 2.
    """

    def __init__(
        self,
        provider: Provider,
        config: ProviderConfig | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        self.provider = provider
        self.config = config if config is not None else ProviderConfig()
        self._sleeper = sleeper
        self._sem = threading.Semaphore(self.config.max_in_flight)
        self._count_lock = threading.Lock()
        self.provider_calls = 0

    def _count(self) -> None:
        with self._count_lock:
            self.provider_calls += 1

    def _attempt_loop(self, fn: Callable[[], Any]) -> Any:
        attempts = 1 + self.config.retry_budget
        for attempt in range(attempts):
            try:
                self._count()
                return fn()
            except TransportError as exc:
                if not exc.retryable or attempt == attempts - 1:
                    raise
                delay = 0.5 * (2**attempt)
                logger.warning("retryable transport failure (%s); sleeping %.1fs", exc, delay)
                self._sleeper(delay)
        raise AssertionError("unreachable")

    def complete_text(self, prompt: str) -> str:
        with self._sem:
            return self._attempt_loop(lambda: self.provider.complete_text(prompt))

    def complete(self, prompt: str, expected_shape: dict | None = None) -> Any:
        """Run a completion; when a shape is given, coerce and validate it.

        Invalid output triggers exactly one repair round-trip. If that also
        fails, SchemaError carries the last extracted value so callers can
        salvage partial results.
        """
        text = self.complete_text(prompt)
        if expected_shape is None:
            return text
        value, problems = self._coerce(text, expected_shape)
        if not problems:
            return value
        repair = _REPAIR_WRAPPER.format(
            schema=json.dumps(expected_shape, sort_keys=True),
            problem="; ".join(problems[:3]),
            reply=text,
        )
        text2 = self.complete_text(repair)
        value2, problems2 = self._coerce(text2, expected_shape)
        if not problems2:
            return value2
        raise SchemaError(
            "; ".join(problems2[:3]), value=value2 if value2 is not None else value
        )

    def _coerce(self, text: str, shape: dict) -> tuple[Any | None, list[str]]:
        value = extract_json(text)
        if value is None and _is_string_array_shape(shape):
            lines = _lines_fallback(text)
            if lines:
                value = lines
        if value is None:
            return None, ["no JSON found in reply"]
        return value, shape_errors(value, shape)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Embed texts and L2-normalize each row (zero vectors stay zero)."""
        if not texts:
            raise ValueError("no texts to embed")
        with self._sem:
            raw = self._attempt_loop(lambda: self.provider.embed_raw(texts))
        mat = np.asarray(raw, dtype=float)
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return mat / norms
