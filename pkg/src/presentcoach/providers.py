"""Uniform client layer for remote AI capabilities (VLM scripting, clone TTS,
standard TTS, ASR, multimodal analysis, chat LLM).

Every capability is driven through a ProviderConfig chain: the primary is
retried with exponential backoff on transient failures, then each fallback in
order. Deterministic stub providers replay scripted outcomes so every pipeline
path is testable offline; `stub://default` endpoints synthesize plausible
payloads from the request itself.
"""

from __future__ import annotations

import base64
import copy
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

import httpx

from . import wav
from .errors import PresentCoachError

CAPABILITIES = ("vlm_script", "tts_clone", "tts_standard", "asr", "mllm_analysis", "llm_chat")

MAX_FALLBACK_DEPTH = 3
DEFAULT_CONCURRENCY = 4
AUDIO_INLINE_LIMIT_BYTES = 10 * 1024 * 1024


class ProviderError(PresentCoachError):
    code = "provider"


class TransientProviderError(ProviderError):
    """Timeouts, connection failures, HTTP 429/5xx: worth retrying."""


class PermanentProviderError(ProviderError):
    """Request is invalid (4xx validation etc.); retrying cannot help."""


class ProviderChainError(ProviderError):
    """Every chain member exhausted. Carries the per-attempt record."""

    def __init__(self, capability: str, attempts: list["Attempt"]):
        lines = "; ".join(f"{a.model_name}#{a.number}: {a.error}" for a in attempts)
        super().__init__(f"all providers for {capability} failed ({lines})")
        self.capability = capability
        self.attempts = attempts


class StubScriptExhausted(AssertionError):
    """Test-harness error: a scripted stub ran out of queued behaviors."""


@dataclass
class ProviderConfig:
    capability: str
    endpoint: str
    model_name: str
    timeout_ms: int = 30_000
    max_retries: int = 2
    backoff_initial_ms: int = 200
    backoff_multiplier: float = 2.0
    fallback: Optional["ProviderConfig"] = None
    api_key: Optional[str] = None

    def __post_init__(self):
        if self.capability not in CAPABILITIES:
            raise ValueError(f"unknown capability {self.capability!r}")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if len(self.chain()) > MAX_FALLBACK_DEPTH + 1:
            raise ValueError(f"fallback depth exceeds {MAX_FALLBACK_DEPTH}")

    def chain(self) -> list["ProviderConfig"]:
        members, node = [], self
        while node is not None:
            members.append(node)
            node = node.fallback
        return members

    @classmethod
    def from_dict(cls, capability: str, d: dict) -> "ProviderConfig":
        fallback = d.get("fallback")
        return cls(
            capability=capability,
            endpoint=d["endpoint"],
            model_name=d.get("model_name", d["endpoint"]),
            timeout_ms=d.get("timeout_ms", 30_000),
            max_retries=d.get("max_retries", 2),
            backoff_initial_ms=d.get("backoff_initial_ms", 200),
            backoff_multiplier=d.get("backoff_multiplier", 2.0),
            fallback=cls.from_dict(capability, fallback) if fallback else None,
            api_key=d.get("api_key"),
        )


@dataclass(frozen=True)
class Attempt:
    model_name: str
    number: int  # 1-based within the member
    error: Optional[str]
    transient: bool


@dataclass
class ProviderOutcome:
    payload: dict
    provider_used: str
    attempts: int
    degraded: bool

    def to_dict(self) -> dict:
        return {
            "provider_used": self.provider_used,
            "attempts": self.attempts,
            "degraded": self.degraded,
        }


class Provider(Protocol):
    def call(self, request: dict) -> dict: ...


class HttpProvider:
    """POSTs the request as JSON to the configured endpoint."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    def call(self, request: dict) -> dict:
        body = {"model": self.config.model_name, **request}
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        try:
            resp = httpx.post(
                self.config.endpoint,
                json=body,
                headers=headers,
                timeout=self.config.timeout_ms / 1000,
            )
        except (httpx.TimeoutException, httpx.TransportError) as e:
            raise TransientProviderError(f"{type(e).__name__}: {e}") from e
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise PermanentProviderError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        return resp.json()


class StubProvider:
    """Replays a scripted sequence of behaviors; optionally falls through to a
    deterministic default once the script is consumed.

    Script entries:
      {"ok": payload}                      -> return payload
      {"error": "transient"|"permanent"}   -> raise accordingly
    """

    def __init__(
        self,
        script: Optional[list[dict]] = None,
        default: Optional[Callable[[dict], dict]] = None,
        latency_s: float = 0.0,
    ):
        self.script = list(script or [])
        self.default = default
        self.latency_s = latency_s
        self.call_log: list[dict] = []
        self._pos = 0
        self._lock = threading.Lock()

    def call(self, request: dict) -> dict:
        with self._lock:
            self.call_log.append(copy.deepcopy(request))
            if self._pos < len(self.script):
                step = self.script[self._pos]
                self._pos += 1
            else:
                step = None
        if self.latency_s:
            time.sleep(self.latency_s)
        if step is None:
            if self.default is not None:
                return self.default(request)
            raise StubScriptExhausted("stub script exhausted and no default behavior configured")
        if "error" in step:
            message = step.get("message", "scripted failure")
            if step["error"] == "permanent":
                raise PermanentProviderError(message)
            raise TransientProviderError(message)
        return copy.deepcopy(step["ok"])


# ---- deterministic default stub payloads ----------------------------------

_WORD_POOL = (
    "today we will look at this slide and walk through the key point it makes "
    "for our audience so that the main idea stays clear and easy to follow "
    "while we keep a steady pace and connect each part to the overall story"
).split()


def _stub_script_text(request: dict, target_words: int = 80) -> str:
    idx = request.get("position", {}).get("index", 1)
    words = [(_WORD_POOL[(idx * 7 + i) % len(_WORD_POOL)]) for i in range(target_words)]
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def _stub_tts_audio(request: dict) -> dict:
    text = request.get("text", "")
    n_words = len(text.split())
    duration_ms = max(400, round(n_words / 160 * 60_000))  # 160 wpm speaking rate
    audio = wav.sine_tone(duration_ms, 16000, freq_hz=220.0, amplitude=0.3)
    return {"audio_b64": base64.b64encode(audio).decode("ascii")}


def _stub_transcript(request: dict) -> dict:
    audio = base64.b64decode(request.get("audio_b64", "")) if request.get("audio_b64") else b""
    try:
        duration_ms = wav.measure_duration_ms(audio)
    except Exception:
        duration_ms = 10_000
    n_words = max(1, round(duration_ms / 1000 * 2.4))  # ~144 wpm
    step = duration_ms / n_words
    words = []
    base = ["this", "is", "my", "practice", "run", "for", "the", "current", "slide", "deck"]
    for i in range(n_words):
        words.append(
            {
                "text": base[i % len(base)],
                "start_ms": round(i * step),
                "end_ms": round((i + 1) * step),
                "confidence": 0.95,
            }
        )
    return {"words": words}


def default_stub_behavior(capability: str) -> Callable[[dict], dict]:
    def behavior(request: dict) -> dict:
        task = request.get("task", "")
        if capability == "vlm_script":
            return {"text": _stub_script_text(request)}
        if capability in ("tts_clone", "tts_standard"):
            return _stub_tts_audio(request)
        if capability == "asr":
            return _stub_transcript(request)
        if capability == "mllm_analysis":
            if task == "audience":
                return {
                    "audience_notes": [
                        {
                            "audience_profile": request.get("audience_profile", "general"),
                            "engagement": "medium",
                            "comprehension": "clear",
                            "confusion_points": [],
                            "reaction_summary": "The audience follows along comfortably.",
                        }
                    ]
                }
            return {
                "analysis": "Delivery is steady; pacing is close to the exemplar. "
                "Focus on smoother transitions between slides.",
                "hints": {"pacing": "ok", "transitions": "improve"},
            }
        if capability == "llm_chat":
            if task == "feedback":
                return {
                    "encouragement": "Your opening was confident and your voice carried well.",
                    "observation": "You paused noticeably before each new slide.",
                    "impact": "Long gaps can make the talk feel fragmented to listeners.",
                    "suggestion": "Rehearse the first sentence of each slide so transitions land immediately.",
                }
            return {"reply": "Let's look at your latest analysis together. " + request.get("message", "")[:200]}
        raise PermanentProviderError(f"no default stub behavior for {capability}")

    return behavior


def default_transport(config: ProviderConfig) -> Provider:
    if config.endpoint.startswith("stub://"):
        return StubProvider(default=default_stub_behavior(config.capability))
    return HttpProvider(config)


class ProviderClient:
    """Executes requests against one capability's config chain."""

    def __init__(
        self,
        config: ProviderConfig,
        transports: Optional[dict[str, Provider]] = None,
        transport_factory: Callable[[ProviderConfig], Provider] = default_transport,
        sleep: Callable[[float], None] = time.sleep,
        concurrency: int = DEFAULT_CONCURRENCY,
    ):
        self.config = config
        self._sleep = sleep
        self._semaphore = threading.Semaphore(concurrency)
        self._providers: dict[str, Provider] = {}
        for member in config.chain():
            if transports and member.model_name in transports:
                self._providers[member.model_name] = transports[member.model_name]
            else:
                self._providers[member.model_name] = transport_factory(member)

    def provider_for(self, model_name: str) -> Provider:
        return self._providers[model_name]

    def invoke(self, request: dict) -> ProviderOutcome:
        chain = self.config.chain()
        primary = chain[0].model_name
        attempts: list[Attempt] = []
        with self._semaphore:
            for member in chain:
                provider = self._providers[member.model_name]
                for n in range(1, member.max_retries + 2):
                    try:
                        payload = provider.call(request)
                    except TransientProviderError as e:
                        attempts.append(Attempt(member.model_name, n, str(e), True))
                        if n <= member.max_retries:
                            delay = member.backoff_initial_ms * member.backoff_multiplier ** (n - 1)
                            self._sleep(delay / 1000)
                        continue
                    except PermanentProviderError as e:
                        # request itself is bad: no retry, no fallback
                        attempts.append(Attempt(member.model_name, n, str(e), False))
                        e.attempts = attempts
                        raise
                    attempts.append(Attempt(member.model_name, n, None, True))
                    return ProviderOutcome(
                        payload=payload,
                        provider_used=member.model_name,
                        attempts=len(attempts),
                        degraded=member.model_name != primary,
                    )
        raise ProviderChainError(self.config.capability, attempts)


def make_stub(
    capability: str,
    script: Optional[list[dict]] = None,
    default: Optional[Callable[[dict], dict]] = None,
    use_default_behavior: bool = False,
    latency_s: float = 0.0,
) -> StubProvider:
    """Deterministic stub provider; replays `script` in order, then falls back
    to `default` (or the capability's built-in default when requested)."""
    if default is None and use_default_behavior:
        default = default_stub_behavior(capability)
    return StubProvider(script=script, default=default, latency_s=latency_s)


class ProviderSet:
    """capability -> ProviderClient, built from the providers config file."""

    def __init__(self, clients: dict[str, ProviderClient]):
        self.clients = clients

    def __getitem__(self, capability: str) -> ProviderClient:
        try:
            return self.clients[capability]
        except KeyError:
            raise ProviderError(f"no provider configured for capability {capability!r}")

    def __contains__(self, capability: str) -> bool:
        return capability in self.clients

    @classmethod
    def from_config(
        cls,
        config: dict,
        transports: Optional[dict[str, Provider]] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> "ProviderSet":
        clients = {}
        for capability, entry in config.get("capabilities", {}).items():
            pc = ProviderConfig.from_dict(capability, entry)
            clients[capability] = ProviderClient(pc, transports=transports, sleep=sleep)
        return cls(clients)

    @classmethod
    def all_stub(cls, overrides: Optional[dict[str, ProviderClient]] = None) -> "ProviderSet":
        """Full offline set: every capability backed by its default stub."""
        clients = {}
        for capability in CAPABILITIES:
            pc = ProviderConfig(capability=capability, endpoint="stub://default", model_name=f"stub-{capability}")
            clients[capability] = ProviderClient(pc, sleep=lambda s: None)
        if overrides:
            clients.update(overrides)
        return cls(clients)
