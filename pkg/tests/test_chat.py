import json
import threading
import time
from datetime import timedelta

import pytest

from fixtures import coaching_session
from presentcoach.chat import (
    SYSTEM_PREAMBLE,
    ChatService,
    build_chat_context,
    summarize_report,
)
from presentcoach.coach import analyze_practice
from presentcoach.errors import BusyError, InputValidationError, PreconditionError
from presentcoach.providers import (
    PermanentProviderError,
    ProviderClient,
    ProviderConfig,
    ProviderSet,
    make_stub,
)
from presentcoach.store import ChatMessage, utcnow


def chat_client(script=None, default=None, latency_s=0.0):
    cfg = ProviderConfig(capability="llm_chat", endpoint="stub://l", model_name="l", max_retries=0)
    stub = make_stub(
        "llm_chat", script=script, default=default,
        use_default_behavior=script is None and default is None, latency_s=latency_s,
    )
    return ProviderClient(cfg, transports={"l": stub}, sleep=lambda s: None), stub


def with_report(store, providers):
    session, exemplar, script, practice = coaching_session(store)
    report = analyze_practice(session, practice, providers, store)
    return store.load_session(session.id), report


def test_context_empty_session(store):
    session, *_ = coaching_session(store)
    ctx = build_chat_context(session, store)
    assert ctx.system_preamble == SYSTEM_PREAMBLE
    assert ctx.included_reports == []
    assert ctx.included_messages == []


def test_context_latest_report_verbatim(store, stub_providers):
    session, report = with_report(store, stub_providers)
    ctx = build_chat_context(session, store)
    assert len(ctx.included_reports) == 1
    parsed = json.loads(ctx.included_reports[0])
    assert parsed["id"] == report.id
    assert parsed == store.read_doc("reports", report.id)


def test_context_older_reports_summarized(store, stub_providers):
    session, exemplar, script, practice = coaching_session(store)
    first = analyze_practice(store.load_session(session.id), practice, stub_providers, store)
    second = analyze_practice(store.load_session(session.id), practice, stub_providers, store)
    ctx = build_chat_context(store.load_session(session.id), store)
    assert len(ctx.included_reports) == 2
    assert json.loads(ctx.included_reports[0])["id"] == second.id
    assert ctx.included_reports[1].startswith(f"Earlier analysis {first.id[:8]}")
    assert "suggestion:" in ctx.included_reports[1]


def test_context_message_tail_never_splits(store):
    session, *_ = coaching_session(store)
    base = utcnow()
    msgs = []
    for i in range(10):
        msgs.append(ChatMessage("user" if i % 2 == 0 else "coach", f"m{i} " + "x" * 200, base + timedelta(seconds=i)))
    store.append_chat(session.id, msgs)
    session = store.load_session(session.id)
    budget = len(SYSTEM_PREAMBLE) + 3 * 204 + 50  # room for ~3 messages
    ctx = build_chat_context(session, store, budget_chars=budget)
    assert 1 <= len(ctx.included_messages) < 10
    # newest messages survive, chronological order preserved
    contents = [m.content for m in ctx.included_messages]
    assert contents == [m.content for m in msgs[-len(contents):]]
    assert ctx.serialized_length() <= budget


def test_context_budget_drops_summaries_before_latest(store, stub_providers):
    session, exemplar, script, practice = coaching_session(store)
    for _ in range(3):
        analyze_practice(store.load_session(session.id), practice, stub_providers, store)
    session = store.load_session(session.id)
    latest_len = len(json.dumps(store.read_doc("reports", session.analysis_refs[-1]), indent=1))
    ctx = build_chat_context(session, store, budget_chars=len(SYSTEM_PREAMBLE) + latest_len + 10)
    assert len(ctx.included_reports) == 1  # only the verbatim latest fits


def test_summarize_failed_report():
    text = summarize_report({"id": "abcd1234ef", "status": "failed", "failed_stage": "asr"})
    assert "failed at asr" in text


def test_request_messages_roles(store, stub_providers):
    session, _ = with_report(store, stub_providers)
    store.append_chat(session.id, [ChatMessage("user", "hi", utcnow()), ChatMessage("coach", "hello", utcnow())])
    ctx = build_chat_context(store.load_session(session.id), store)
    roles = [m["role"] for m in ctx.to_request_messages()]
    assert roles[0] == "system"
    assert roles[-2:] == ["user", "assistant"]


def test_send_message_appends_pair(store, stub_providers):
    session, report = with_report(store, stub_providers)
    service = ChatService(store, stub_providers)
    reply = service.send_message(session.id, "How was my pacing?")
    assert reply.role == "coach"
    assert reply.linked_analysis == report.id
    history = store.load_session(session.id).chat_history
    assert [m.role for m in history] == ["user", "coach"]
    assert history[0].delivery_failed is False


def test_send_message_empty_rejected(store, stub_providers):
    session, _ = with_report(store, stub_providers)
    service = ChatService(store, stub_providers)
    with pytest.raises(InputValidationError):
        service.send_message(session.id, "   ")


def test_send_message_requires_coaching(store, stub_providers):
    fresh = store.create_session()
    service = ChatService(store, stub_providers)
    with pytest.raises(PreconditionError):
        service.send_message(fresh.id, "hello")


def test_send_failure_keeps_user_message_flagged(store, stub_providers):
    session, _ = with_report(store, stub_providers)
    client, _ = chat_client(script=[{"error": "permanent", "message": "nope"}])
    service = ChatService(store, ProviderSet.all_stub(overrides={"llm_chat": client}))
    with pytest.raises(PermanentProviderError):
        service.send_message(session.id, "hello?")
    history = store.load_session(session.id).chat_history
    assert len(history) == 1
    assert history[0].role == "user"
    assert history[0].delivery_failed is True


def test_empty_reply_treated_as_failure(store, stub_providers):
    session, _ = with_report(store, stub_providers)
    client, _ = chat_client(script=[{"ok": {"reply": "   "}}])
    service = ChatService(store, ProviderSet.all_stub(overrides={"llm_chat": client}))
    with pytest.raises(PermanentProviderError):
        service.send_message(session.id, "hello?")
    assert store.load_session(session.id).chat_history[0].delivery_failed is True


def test_concurrent_sends_one_busy(store, stub_providers):
    session, _ = with_report(store, stub_providers)
    client, _ = chat_client(latency_s=0.3)
    service = ChatService(store, ProviderSet.all_stub(overrides={"llm_chat": client}))
    results = {}

    def send(key):
        try:
            results[key] = service.send_message(session.id, f"msg {key}")
        except BusyError:
            results[key] = "busy"

    t1 = threading.Thread(target=send, args=("a",))
    t1.start()
    time.sleep(0.1)  # let the first request claim the slot
    send("b")
    t1.join()
    assert results["b"] == "busy"
    assert results["a"] != "busy"


def test_sessions_independent_for_busy(store, stub_providers):
    s1, _ = with_report(store, stub_providers)
    s2info = coaching_session(store)
    client, _ = chat_client(latency_s=0.3)
    service = ChatService(store, ProviderSet.all_stub(overrides={"llm_chat": client}))
    results = {}

    def send(sid, key):
        try:
            results[key] = service.send_message(sid, "hello")
        except BusyError:
            results[key] = "busy"

    t1 = threading.Thread(target=send, args=(s1.id, "a"))
    t1.start()
    time.sleep(0.1)
    send(s2info[0].id, "b")
    t1.join()
    assert results["a"] != "busy" and results["b"] != "busy"


def test_busy_slot_released_after_completion(store, stub_providers):
    session, _ = with_report(store, stub_providers)
    service = ChatService(store, stub_providers)
    service.send_message(session.id, "first")
    reply = service.send_message(session.id, "second")
    assert reply.role == "coach"
    assert len(store.load_session(session.id).chat_history) == 4
