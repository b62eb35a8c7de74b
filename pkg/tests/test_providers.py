import base64

import pytest

from presentcoach import wav
from presentcoach.providers import (
    Attempt,
    PermanentProviderError,
    ProviderChainError,
    ProviderClient,
    ProviderConfig,
    ProviderSet,
    StubProvider,
    StubScriptExhausted,
    default_stub_behavior,
    make_stub,
)

NOSLEEP = lambda s: None


def chain_config(primary_retries=2, fallback_retries=0, **kw):
    fb = ProviderConfig(
        capability="llm_chat", endpoint="stub://fb", model_name="fb", max_retries=fallback_retries
    )
    return ProviderConfig(
        capability="llm_chat",
        endpoint="stub://primary",
        model_name="primary",
        max_retries=primary_retries,
        fallback=fb,
        **kw,
    )


def client_with(stubs, config, record_sleeps=None):
    sleep = record_sleeps.append if record_sleeps is not None else NOSLEEP
    return ProviderClient(config, transports=stubs, sleep=sleep)


def test_success_first_try():
    stub = make_stub("llm_chat", script=[{"ok": {"reply": "hi"}}])
    client = client_with({"primary": stub}, chain_config())
    out = client.invoke({"task": "chat"})
    assert out.payload == {"reply": "hi"}
    assert out.provider_used == "primary"
    assert out.attempts == 1
    assert out.degraded is False


def test_transient_then_success_counts_attempts():
    stub = make_stub(
        "llm_chat",
        script=[{"error": "transient"}, {"error": "transient"}, {"ok": {"reply": "third"}}],
    )
    client = client_with({"primary": stub}, chain_config(primary_retries=3))
    out = client.invoke({})
    assert out.attempts == 3
    assert out.degraded is False
    assert len(stub.call_log) == 3


def test_retry_ceiling_then_fallback_degraded():
    primary = make_stub("llm_chat", script=[{"error": "transient"}] * 3)
    fb = make_stub("llm_chat", script=[{"ok": {"reply": "rescued"}}])
    client = client_with({"primary": primary, "fb": fb}, chain_config(primary_retries=2))
    out = client.invoke({})
    assert out.provider_used == "fb"
    assert out.degraded is True
    assert out.attempts == 4  # 3 primary tries + 1 fallback
    assert len(primary.call_log) == 3  # max_retries=2 means 3 tries total


def test_permanent_error_aborts_without_fallback():
    primary = make_stub("llm_chat", script=[{"error": "permanent", "message": "bad request"}])
    fb = make_stub("llm_chat", script=[{"ok": {"reply": "should not be called"}}])
    client = client_with({"primary": primary, "fb": fb}, chain_config())
    with pytest.raises(PermanentProviderError):
        client.invoke({})
    assert len(primary.call_log) == 1  # no retry on permanent
    assert fb.call_log == []  # no fallback on permanent


def test_whole_chain_exhausted():
    primary = make_stub("llm_chat", script=[{"error": "transient"}] * 3)
    fb = make_stub("llm_chat", script=[{"error": "transient"}])
    client = client_with({"primary": primary, "fb": fb}, chain_config(primary_retries=2))
    with pytest.raises(ProviderChainError) as exc:
        client.invoke({})
    attempts = exc.value.attempts
    assert [a.model_name for a in attempts] == ["primary"] * 3 + ["fb"]
    assert all(a.transient for a in attempts)


def test_backoff_schedule_exponential():
    primary = make_stub("llm_chat", script=[{"error": "transient"}] * 3 + [{"ok": {}}])
    cfg = ProviderConfig(
        capability="llm_chat",
        endpoint="stub://p",
        model_name="primary",
        max_retries=3,
        backoff_initial_ms=100,
        backoff_multiplier=2.0,
    )
    sleeps = []
    client = client_with({"primary": primary}, cfg, record_sleeps=sleeps)
    client.invoke({})
    assert sleeps == [0.1, 0.2, 0.4]


def test_no_sleep_after_final_attempt():
    primary = make_stub("llm_chat", script=[{"error": "transient"}] * 2)
    cfg = ProviderConfig(
        capability="llm_chat", endpoint="stub://p", model_name="primary", max_retries=1
    )
    sleeps = []
    client = client_with({"primary": primary}, cfg, record_sleeps=sleeps)
    with pytest.raises(ProviderChainError):
        client.invoke({})
    assert len(sleeps) == 1  # only between attempts, not after the last one


def test_fallback_depth_cap():
    node = ProviderConfig(capability="llm_chat", endpoint="stub://d", model_name="d3")
    for name in ("d2", "d1", "d0"):
        node = ProviderConfig(
            capability="llm_chat", endpoint="stub://d", model_name=name, fallback=node
        )
    assert len(node.chain()) == 4  # depth 3 is allowed
    with pytest.raises(ValueError):
        ProviderConfig(capability="llm_chat", endpoint="stub://d", model_name="d-1", fallback=node)


def test_unknown_capability_rejected():
    with pytest.raises(ValueError):
        ProviderConfig(capability="nonsense", endpoint="stub://x", model_name="x")


def test_stub_script_exhaustion_is_loud():
    stub = StubProvider(script=[{"ok": {}}])
    stub.call({})
    with pytest.raises(StubScriptExhausted):
        stub.call({})


def test_default_stub_tts_duration_scales_with_text():
    behavior = default_stub_behavior("tts_standard")
    short = behavior({"task": "tts", "text": "word " * 40})
    long = behavior({"task": "tts", "text": "word " * 80})
    d_short = wav.measure_duration_ms(base64.b64decode(short["audio_b64"]))
    d_long = wav.measure_duration_ms(base64.b64decode(long["audio_b64"]))
    assert d_long > d_short
    assert d_short == round(40 / 160 * 60_000)


def test_default_stub_asr_words_non_decreasing():
    audio = wav.sine_tone(5000, 16000)
    out = default_stub_behavior("asr")(
        {"task": "transcribe", "audio_b64": base64.b64encode(audio).decode()}
    )
    words = out["words"]
    assert words
    for prev, cur in zip(words, words[1:]):
        assert cur["start_ms"] >= prev["start_ms"]
    assert words[-1]["end_ms"] == 5000


def test_default_stub_deterministic():
    b = default_stub_behavior("vlm_script")
    req = {"task": "script", "position": {"index": 2}}
    assert b(req) == b(req)


def test_from_config_round_trip():
    cfg = {
        "capabilities": {
            "llm_chat": {
                "endpoint": "stub://a",
                "model_name": "a",
                "max_retries": 0,
                "fallback": {"endpoint": "stub://b", "model_name": "b"},
            }
        }
    }
    pset = ProviderSet.from_config(cfg, sleep=NOSLEEP)
    chain = pset["llm_chat"].config.chain()
    assert [m.model_name for m in chain] == ["a", "b"]
    assert chain[1].max_retries == 2  # default


def test_all_stub_covers_every_capability(stub_providers):
    for cap in ("vlm_script", "tts_clone", "tts_standard", "asr", "mllm_analysis", "llm_chat"):
        out = stub_providers[cap].invoke({"task": "chat", "text": "hello there", "message": "m"})
        assert out.payload
