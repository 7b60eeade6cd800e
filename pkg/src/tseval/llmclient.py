"""Provider-agnostic chat client over the OpenAI-compatible wire protocol.

One bundle maps to one user message whose content list preserves part order:
consecutive text parts coalesce into a single text entry and each image part
becomes a base64 PNG data-URI entry.  A deterministic in-process mock provider
mirrors the same interface for hermetic runs, and ``query_until_answer``
implements the bounded rerun loop used when a response yields no answer.
"""
from __future__ import annotations

import base64
import json
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import httpx

from .core import PriceConfig, ReasoningTrace
from .prompt import PromptBundle, TextPart
from .scoring import AnswerParseError
from .viz import Detail, GPT4O_TOKEN_RULE, estimate_image_tokens


class ClientError(Exception):
    pass


class Transport(ClientError):
    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class RateLimited(ClientError):
    def __init__(self, message: str, retry_after: float | None = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class AuthFailed(ClientError):
    pass


class ProviderError(ClientError):
    pass


class ScriptExhausted(ClientError):
    pass


class ExhaustedRetries(ClientError):
    """Raised when no parseable answer arrived within the attempt cap."""

    def __init__(self, message: str, last_response: str, aggregate: "Completion") -> None:
        super().__init__(message)
        self.last_response = last_response
        self.aggregate = aggregate


@dataclass(frozen=True)
class ProviderConfig:
    """Connection, sampling, and accounting settings for one model endpoint."""

    model_id: str
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    image_detail: Detail = Detail.LOW
    price: PriceConfig = field(default_factory=PriceConfig)
    request_timeout_s: float = 60.0
    max_retries: int = 3
    parallelism: int = 1
    multimodal: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.request_timeout_s <= 0:
            raise ValueError("request_timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass(frozen=True)
class Usage:
    input_tokens: int
    output_tokens: int
    input_source: str = "provider"  # "provider" | "estimated"

    def __add__(self, other: "Usage") -> "Usage":
        source = "provider" if (
            self.input_source == "provider" and other.input_source == "provider"
        ) else "estimated"
        return Usage(
            input_tokens=self.input_tokens + other.input_tokens,
            output_tokens=self.output_tokens + other.output_tokens,
            input_source=source,
        )


@dataclass(frozen=True)
class Completion:
    text: str
    usage: Usage
    latency_ms: int = 0


def estimate_bundle_tokens(bundle: PromptBundle, image_tokens: int | None = None) -> int:
    """Crude input-token estimate: text characters / 4 plus per-image charges."""
    total = 0
    for part in bundle.parts:
        if isinstance(part, TextPart):
            total += len(part.text) // 4
        else:
            if image_tokens is not None:
                total += image_tokens
            else:
                total += estimate_image_tokens(part.image, GPT4O_TOKEN_RULE)
    return total


def bundle_to_messages(bundle: PromptBundle) -> list[dict]:
    """Map a bundle to one OpenAI-style user message, preserving part order."""
    content: list[dict] = []
    for part in bundle.parts:
        if isinstance(part, TextPart):
            if content and content[-1]["type"] == "text":
                content[-1]["text"] += part.text
            else:
                content.append({"type": "text", "text": part.text})
        else:
            encoded = base64.b64encode(part.image.png_bytes).decode("ascii")
            content.append(
                {
                    "type": "image_url",
                    "image_url": {
                        "url": f"data:image/png;base64,{encoded}",
                        "detail": part.image.detail.value,
                    },
                }
            )
    return [{"role": "user", "content": content}]


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------

class Provider:
    """Common bookkeeping: thread-safe accumulation of usage across requests."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total = Usage(0, 0, "provider")
        self._requests = 0

    def _record(self, usage: Usage) -> None:
        with self._lock:
            self._total = self._total + usage
            self._requests += 1

    @property
    def total_usage(self) -> Usage:
        with self._lock:
            return self._total

    @property
    def request_count(self) -> int:
        with self._lock:
            return self._requests

    def send(self, bundle: PromptBundle) -> Completion:
        raise NotImplementedError


BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_MAX_S = 60.0


class OpenAIChatProvider(Provider):
    """Live client for OpenAI-compatible ``/chat/completions`` endpoints.

    Transient failures (rate limits, transport errors) retry with exponential
    backoff up to ``config.max_retries``; the parse-failure rerun loop in
    ``query_until_answer`` is separate and immediate.
    """

    def __init__(
        self,
        config: ProviderConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep_fn: Callable[[float], None] = time.sleep,
    ) -> None:
        super().__init__()
        self.config = config
        self._sleep = sleep_fn
        self._client = httpx.Client(
            timeout=config.request_timeout_s, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            import os

            key = os.environ.get(self.config.api_key_env)
            if not key:
                raise AuthFailed(
                    f"environment variable {self.config.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_once(self, payload: dict) -> tuple[dict, int]:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        started = time.monotonic()
        try:
            response = self._client.post(url, json=payload, headers=self._headers())
        except httpx.HTTPError as exc:
            raise Transport(f"request failed: {exc}") from exc
        latency_ms = int((time.monotonic() - started) * 1000)
        if response.status_code in (401, 403):
            raise AuthFailed(f"HTTP {response.status_code}: {response.text[:200]}")
        if response.status_code == 429:
            retry_after = response.headers.get("Retry-After")
            raise RateLimited(
                "rate limited",
                retry_after=float(retry_after) if retry_after else None,
            )
        if response.status_code >= 500:
            raise Transport(
                f"HTTP {response.status_code}: {response.text[:200]}",
                status=response.status_code,
            )
        if response.status_code != 200:
            raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json(), latency_ms
        except json.JSONDecodeError as exc:
            raise ProviderError(f"malformed JSON response: {exc}") from exc

    def send(self, bundle: PromptBundle) -> Completion:
        payload = {
            "model": self.config.model_id,
            "messages": bundle_to_messages(bundle),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        attempt = 0
        while True:
            try:
                body, latency_ms = self._post_once(payload)
                break
            except (RateLimited, Transport) as exc:
                if attempt >= self.config.max_retries:
                    raise
                delay = min(BACKOFF_BASE_S * (BACKOFF_FACTOR ** attempt), BACKOFF_MAX_S)
                if isinstance(exc, RateLimited) and exc.retry_after:
                    delay = max(delay, exc.retry_after)
                self._sleep(delay + random.uniform(0.0, delay / 10.0))
                attempt += 1
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response shape: {body!r:.200}") from exc
        usage_raw = body.get("usage") or {}
        if "prompt_tokens" in usage_raw:
            usage = Usage(
                input_tokens=int(usage_raw.get("prompt_tokens", 0)),
                output_tokens=int(usage_raw.get("completion_tokens", 0)),
                input_source="provider",
            )
        else:
            usage = Usage(
                input_tokens=estimate_bundle_tokens(bundle),
                output_tokens=len(text) // 4,
                input_source="estimated",
            )
        completion = Completion(text=text, usage=usage, latency_ms=latency_ms)
        self._record(usage)
        return completion


Script = Sequence[str] | Mapping[str, "str | Sequence[str]"] | Callable[[PromptBundle, int], str]


class MockProvider(Provider):
    """Deterministic scripted provider for hermetic runs and tests.

    The script is one of:
      * a sequence of responses, consumed in request order;
      * a mapping from request fingerprint (default: the bundle's task name)
        to a response (replayed forever) or a list of responses (consumed);
      * a callable ``(bundle, calls_so_far_for_fingerprint) -> response``.

    Every request is recorded for assertions. Synthetic usage is
    ``len(text) // 4`` input tokens per text part plus a flat per-image
    constant, and zero latency, so whole runs stay byte-reproducible.
    """

    def __init__(
        self,
        script: Script,
        *,
        fingerprint: Callable[[PromptBundle], str] | None = None,
        tokens_per_image: int = 85,
        output_divisor: int = 4,
    ) -> None:
        super().__init__()
        if isinstance(script, str):
            raise ValueError("script must be a sequence, mapping, or callable, not a bare string")
        if isinstance(script, (Sequence, Mapping)) and not script:
            raise ValueError("script must be non-empty")
        self._script = script
        self._fingerprint = fingerprint or (lambda bundle: bundle.task)
        self._tokens_per_image = tokens_per_image
        self._output_divisor = output_divisor
        self._cursor = 0
        self._per_key_counts: dict[str, int] = {}
        self.requests: list[PromptBundle] = []

    def _next_response(self, bundle: PromptBundle) -> str:
        key = self._fingerprint(bundle)
        seen = self._per_key_counts.get(key, 0)
        self._per_key_counts[key] = seen + 1
        script = self._script
        if callable(script):
            return script(bundle, seen)
        if isinstance(script, Mapping):
            if key not in script:
                raise ScriptExhausted(f"no scripted response for fingerprint {key!r}")
            entry = script[key]
            if isinstance(entry, str):
                return entry
            if seen >= len(entry):
                raise ScriptExhausted(f"script for {key!r} exhausted after {len(entry)} responses")
            return entry[seen]
        if self._cursor >= len(script):
            raise ScriptExhausted(f"sequence script exhausted after {len(script)} responses")
        response = script[self._cursor]
        self._cursor += 1
        return response

    def send(self, bundle: PromptBundle) -> Completion:
        with self._lock:
            self.requests.append(bundle)
            text = self._next_response(bundle)
        usage = Usage(
            input_tokens=estimate_bundle_tokens(bundle, image_tokens=self._tokens_per_image),
            output_tokens=len(text) // self._output_divisor,
            input_source="estimated",
        )
        self._record(usage)
        return Completion(text=text, usage=usage, latency_ms=0)


def mock_provider(script: Script, **kwargs) -> MockProvider:
    """Convenience constructor mirroring ``MockProvider``."""
    return MockProvider(script, **kwargs)


def send(bundle: PromptBundle, provider: Provider) -> Completion:
    """Send one bundle through any provider."""
    return provider.send(bundle)


def query_until_answer(
    bundle: PromptBundle,
    provider: Provider,
    parser: Callable[[str], str],
    cap: int = 5,
) -> tuple[ReasoningTrace, Completion]:
    """Re-send the identical bundle until the parser extracts an answer.

    The parser must return a class letter or raise ``AnswerParseError``.
    Aggregate usage and latency sum over all attempts; raises
    ``ExhaustedRetries`` (with the aggregate attached) once ``cap`` attempts
    all fail to parse.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    total_usage = Usage(0, 0, "provider")
    total_latency = 0
    last_text = ""
    for attempt in range(cap):
        completion = provider.send(bundle)
        total_usage = total_usage + completion.usage
        total_latency += completion.latency_ms
        last_text = completion.text
        try:
            letter = parser(completion.text)
        except AnswerParseError:
            continue
        aggregate = Completion(text=last_text, usage=total_usage, latency_ms=total_latency)
        trace = ReasoningTrace(
            raw_response=last_text, parsed_choice=letter, retries_used=attempt
        )
        return trace, aggregate
    aggregate = Completion(text=last_text, usage=total_usage, latency_ms=total_latency)
    raise ExhaustedRetries(
        f"no parseable answer in {cap} attempts", last_response=last_text, aggregate=aggregate
    )
