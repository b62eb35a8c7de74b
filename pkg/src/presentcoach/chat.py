"""Context-aware coaching chat over the session's analyses and prior turns.

Context packing is deterministic: persona preamble, latest report verbatim,
older reports as template summaries (key metrics + suggestion), then the
newest chat messages that still fit the character budget. Truncation never
splits a message.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from .errors import BusyError, InputValidationError, PreconditionError
from .providers import PermanentProviderError, ProviderChainError, ProviderSet
from .store import ChatMessage, Session, SessionStore, Stage, utcnow

DEFAULT_BUDGET_CHARS = 24_000

SYSTEM_PREAMBLE = (
    "You are a supportive presentation coach. Ground every reply in the "
    "rehearsal analyses provided. Feedback follows the house convention: "
    "sincere encouragement first, then Observation (what you noticed), "
    "Impact (why it matters), Suggestion (what to do next). Be concrete, "
    "kind, and brief."
)


@dataclass
class ChatContext:
    system_preamble: str
    included_reports: list[str]  # latest verbatim first, then summaries
    included_messages: list[ChatMessage]  # chronological
    budget_chars: int

    def serialized_length(self) -> int:
        return (
            len(self.system_preamble)
            + sum(len(r) for r in self.included_reports)
            + sum(len(m.content) for m in self.included_messages)
        )

    def to_request_messages(self) -> list[dict]:
        parts = [{"role": "system", "content": self.system_preamble}]
        for r in self.included_reports:
            parts.append({"role": "system", "content": r})
        for m in self.included_messages:
            parts.append({"role": "assistant" if m.role == "coach" else "user", "content": m.content})
        return parts


def summarize_report(doc: dict) -> str:
    """Template summary of an older report: key metrics plus the suggestion."""
    lines = [f"Earlier analysis {doc.get('id', '?')[:8]}:"]
    metrics = doc.get("metrics") or {}
    if metrics:
        lines.append(
            "  pace {:.0f} wpm, {} fillers, {} pauses, longest {} ms".format(
                metrics.get("words_per_minute", 0),
                metrics.get("filler_count", 0),
                metrics.get("pause_count", 0),
                metrics.get("longest_pause_ms", 0),
            )
        )
        if metrics.get("duration_ratio"):
            lines.append(f"  duration ratio vs exemplar: {metrics['duration_ratio']:.2f}")
    feedback = doc.get("feedback") or {}
    if feedback.get("suggestion"):
        lines.append(f"  suggestion: {feedback['suggestion']}")
    if doc.get("status") == "failed":
        lines.append(f"  (analysis failed at {doc.get('failed_stage', 'unknown stage')})")
    return "\n".join(lines)


def build_chat_context(
    session: Session,
    store: SessionStore,
    budget_chars: int = DEFAULT_BUDGET_CHARS,
) -> ChatContext:
    """Deterministic packing under the character budget. The latest report is
    always included verbatim when any exists."""
    reports: list[str] = []
    used = len(SYSTEM_PREAMBLE)
    report_ids = list(session.analysis_refs)
    if report_ids:
        latest = store.read_doc("reports", report_ids[-1])
        verbatim = json.dumps(latest, indent=1)
        reports.append(verbatim)
        used += len(verbatim)
        for rid in reversed(report_ids[:-1]):
            summary = summarize_report(store.read_doc("reports", rid))
            if used + len(summary) > budget_chars:
                break
            reports.append(summary)
            used += len(summary)
    included: list[ChatMessage] = []
    for message in reversed(session.chat_history):
        if used + len(message.content) > budget_chars:
            break
        included.append(message)
        used += len(message.content)
    included.reverse()
    return ChatContext(
        system_preamble=SYSTEM_PREAMBLE,
        included_reports=reports,
        included_messages=included,
        budget_chars=budget_chars,
    )


class ChatService:
    """One in-flight coach reply per session; different sessions independent."""

    def __init__(self, store: SessionStore, providers: ProviderSet, budget_chars: int = DEFAULT_BUDGET_CHARS):
        self.store = store
        self.providers = providers
        self.budget_chars = budget_chars
        self._pending: set[str] = set()
        self._lock = threading.Lock()

    def send_message(self, session_id: str, user_text: str) -> ChatMessage:
        """Build context, invoke the chat LLM, and append both the user turn
        and the coach reply atomically (both or neither grow the history by a
        failed pair: on provider failure the user message is kept with a
        delivery-failed marker and no coach message is fabricated)."""
        if not user_text or not user_text.strip():
            raise InputValidationError("chat message must be nonempty")
        session = self.store.load_session(session_id)
        if session.stage is not Stage.COACHING:
            raise PreconditionError(f"chat requires coaching stage, session is in {session.stage.value}")
        with self._lock:
            if session_id in self._pending:
                raise BusyError("a coach reply is already in flight for this session")
            self._pending.add(session_id)
        try:
            context = build_chat_context(session, self.store, self.budget_chars)
            user_message = ChatMessage(role="user", content=user_text, timestamp=utcnow())
            request = {
                "task": "chat",
                "messages": context.to_request_messages() + [{"role": "user", "content": user_text}],
                "message": user_text,
            }
            try:
                outcome = self.providers["llm_chat"].invoke(request)
            except (ProviderChainError, PermanentProviderError):
                user_message.delivery_failed = True
                self.store.append_chat(session_id, [user_message])
                raise
            reply_text = str(outcome.payload.get("reply") or "").strip()
            if not reply_text:
                user_message.delivery_failed = True
                self.store.append_chat(session_id, [user_message])
                raise PermanentProviderError("chat provider returned an empty reply")
            linked = session.analysis_refs[-1] if session.analysis_refs else None
            coach_message = ChatMessage(
                role="coach", content=reply_text, timestamp=utcnow(), linked_analysis=linked
            )
            self.store.append_chat(session_id, [user_message, coach_message])
            return coach_message
        finally:
            with self._lock:
                self._pending.discard(session_id)
