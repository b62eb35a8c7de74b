"""Practice evaluation against the exemplar: deterministic metrics, four-source
multimodal analysis, audience simulation, and schema-validated
Observation-Impact-Suggestion feedback."""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

from .errors import PreconditionError, PresentCoachError
from .metrics import (
    DEFAULT_FILLER_LEXICON,
    DeliveryMetrics,
    PauseParams,
    Transcript,
    compute_delivery_metrics,
)
from .providers import (
    PermanentProviderError,
    ProviderChainError,
    ProviderClient,
    ProviderSet,
)
from .script import NarrationScript, count_words
from .store import BlobRef, Session, SessionStore, Stage, new_id, utcnow
from .video import ExemplarVideo

OIS_WORD_LIMIT = 150

ENGAGEMENT_LEVELS = ("low", "medium", "high")
COMPREHENSION_LEVELS = ("confused", "partial", "clear")

SOURCE_NAMES = {
    1: "slide image",
    2: "ideal narration script",
    3: "ideal audio",
    4: "user audio",
}


class AnalysisError(PresentCoachError):
    code = "analysis"


class FeedbackError(PresentCoachError):
    code = "feedback"

    def __init__(self, message: str, drafts: list[dict]):
        super().__init__(message)
        self.drafts = drafts


class AudienceSimulationError(PresentCoachError):
    code = "audience"


@dataclass
class PracticeRecording:
    id: str
    session_ref: str
    audio_ref: str  # normalized wav blob hash
    duration_ms: int
    recorded_at: datetime
    slide_range: Optional[tuple[int, int]] = None  # (from_index, to_index), 1-based inclusive

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "session_ref": self.session_ref,
            "audio_ref": self.audio_ref,
            "duration_ms": self.duration_ms,
            "recorded_at": self.recorded_at.isoformat(),
            "slide_range": list(self.slide_range) if self.slide_range else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PracticeRecording":
        sr = d.get("slide_range")
        return cls(
            id=d["id"],
            session_ref=d["session_ref"],
            audio_ref=d["audio_ref"],
            duration_ms=d["duration_ms"],
            recorded_at=datetime.fromisoformat(d["recorded_at"]),
            slide_range=(sr[0], sr[1]) if sr else None,
        )


@dataclass
class AudienceNote:
    audience_profile: str
    engagement: str
    comprehension: str
    confusion_points: list[str] = field(default_factory=list)
    reaction_summary: str = ""
    repaired: bool = False  # set when an invariant repair was applied on parse

    def to_dict(self) -> dict:
        return {
            "audience_profile": self.audience_profile,
            "engagement": self.engagement,
            "comprehension": self.comprehension,
            "confusion_points": list(self.confusion_points),
            "reaction_summary": self.reaction_summary,
            "repaired": self.repaired,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AudienceNote":
        return cls(
            d["audience_profile"], d["engagement"], d["comprehension"],
            list(d.get("confusion_points", [])), d.get("reaction_summary", ""),
            d.get("repaired", False),
        )


@dataclass
class OISFeedback:
    encouragement: str
    observation: str
    impact: str
    suggestion: str

    @property
    def ois_word_count(self) -> int:
        return count_words(self.observation) + count_words(self.impact) + count_words(self.suggestion)

    def to_dict(self) -> dict:
        return {
            "encouragement": self.encouragement,
            "observation": self.observation,
            "impact": self.impact,
            "suggestion": self.suggestion,
            "ois_word_count": self.ois_word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OISFeedback":
        return cls(d["encouragement"], d["observation"], d["impact"], d["suggestion"])


def validate_ois(candidate: dict) -> list[str]:
    """Violation list for a feedback draft; empty means acceptable. The word
    cap applies to O+I+S combined (inclusive), encouragement is uncounted."""
    violations = []
    for name in ("encouragement", "observation", "impact", "suggestion"):
        value = candidate.get(name)
        if not isinstance(value, str) or not value.strip():
            violations.append(f"field '{name}' is missing or empty")
    if violations:
        return violations
    total = sum(count_words(candidate[k]) for k in ("observation", "impact", "suggestion"))
    if total > OIS_WORD_LIMIT:
        violations.append(
            f"observation+impact+suggestion is {total} words, limit is {OIS_WORD_LIMIT}"
        )
    return violations


@dataclass
class FourSourceBundle:
    """The analysis input contract: all four sources must be present."""

    slide_image_refs: list[str]
    script_segments: list[dict]  # {slide_index, text}
    ideal_audio_refs: list[str]
    user_audio_ref: str

    def __post_init__(self):
        missing = []
        if not self.slide_image_refs:
            missing.append(1)
        if not self.script_segments:
            missing.append(2)
        if not self.ideal_audio_refs:
            missing.append(3)
        if not self.user_audio_ref:
            missing.append(4)
        if missing:
            names = ", ".join(f"source ({n}) {SOURCE_NAMES[n]}" for n in missing)
            raise PreconditionError(f"analysis bundle incomplete: missing {names}")

    def to_dict(self) -> dict:
        return {
            "slide_image_refs": list(self.slide_image_refs),
            "script_segments": list(self.script_segments),
            "ideal_audio_refs": list(self.ideal_audio_refs),
            "user_audio_ref": self.user_audio_ref,
        }


@dataclass
class AnalysisReport:
    id: str
    practice_ref: str
    inputs: FourSourceBundle
    metrics: DeliveryMetrics
    transcript: Transcript
    audience_notes: list[AudienceNote]
    feedback: OISFeedback
    created_at: datetime
    provider_outcomes: list[dict] = field(default_factory=list)
    analysis_text: str = ""

    def __post_init__(self):
        violations = validate_ois(self.feedback.to_dict())
        if violations:
            raise PreconditionError("report feedback invalid: " + "; ".join(violations))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "status": "complete",
            "practice_ref": self.practice_ref,
            "inputs": self.inputs.to_dict(),
            "metrics": self.metrics.to_dict(),
            "transcript": self.transcript.to_dict(),
            "audience_notes": [n.to_dict() for n in self.audience_notes],
            "feedback": self.feedback.to_dict(),
            "created_at": self.created_at.isoformat(),
            "provider_outcomes": list(self.provider_outcomes),
            "analysis_text": self.analysis_text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(
            id=d["id"],
            practice_ref=d["practice_ref"],
            inputs=FourSourceBundle(**d["inputs"]),
            metrics=DeliveryMetrics.from_dict(d["metrics"]),
            transcript=Transcript.from_dict(d["transcript"]),
            audience_notes=[AudienceNote.from_dict(n) for n in d.get("audience_notes", [])],
            feedback=OISFeedback.from_dict(d["feedback"]),
            created_at=datetime.fromisoformat(d["created_at"]),
            provider_outcomes=list(d.get("provider_outcomes", [])),
            analysis_text=d.get("analysis_text", ""),
        )


def transcribe(user_audio: bytes, asr: ProviderClient) -> tuple[Transcript, dict]:
    outcome = asr.invoke({"task": "transcribe", "audio_b64": base64.b64encode(user_audio).decode("ascii")})
    words = outcome.payload.get("words", [])
    transcript = Transcript.from_dict({"words": words})
    return transcript, {"stage": "asr", **outcome.to_dict()}


def run_multimodal_analysis(
    bundle: FourSourceBundle,
    metrics: DeliveryMetrics,
    mllm: ProviderClient,
) -> tuple[str, dict, dict]:
    """Returns (analysis text, structured hints, provider audit record)."""
    request = {
        "task": "analyze",
        "sources": bundle.to_dict(),
        "metrics": metrics.to_dict(),
    }
    try:
        outcome = mllm.invoke(request)
    except (ProviderChainError, PermanentProviderError) as e:
        raise AnalysisError(f"multimodal analysis failed: {e}") from e
    payload = outcome.payload
    audit = {"stage": "mllm_analysis", "response": payload, **outcome.to_dict()}
    return payload.get("analysis", ""), payload.get("hints", {}), audit


def _parse_audience_notes(payload: dict, profile: str) -> list[AudienceNote]:
    raw_notes = payload.get("audience_notes")
    if not isinstance(raw_notes, list) or not raw_notes:
        raise ValueError("response carries no audience_notes list")
    notes = []
    for raw in raw_notes:
        if not isinstance(raw, dict):
            raise ValueError("audience note is not an object")
        engagement = str(raw.get("engagement", "")).lower()
        comprehension = str(raw.get("comprehension", "")).lower()
        if engagement not in ENGAGEMENT_LEVELS:
            raise ValueError(f"engagement {engagement!r} is not one of {ENGAGEMENT_LEVELS}")
        if comprehension not in COMPREHENSION_LEVELS:
            raise ValueError(f"comprehension {comprehension!r} is not one of {COMPREHENSION_LEVELS}")
        confusion = [str(c) for c in raw.get("confusion_points", [])]
        repaired = False
        if confusion and comprehension == "clear":
            # invariant: confusion points imply comprehension below clear
            comprehension = "partial"
            repaired = True
        notes.append(
            AudienceNote(
                audience_profile=str(raw.get("audience_profile") or profile),
                engagement=engagement,
                comprehension=comprehension,
                confusion_points=confusion,
                reaction_summary=str(raw.get("reaction_summary", "")),
                repaired=repaired,
            )
        )
    return notes


def simulate_audience(
    user_audio: bytes,
    transcript: Transcript,
    audience_profile: str,
    provider: ProviderClient,
) -> tuple[list[AudienceNote], list[dict]]:
    """Audience-perspective reactions; one repair re-prompt on an unparseable
    response, then the caller proceeds without notes (degraded)."""
    if not audience_profile:
        raise PreconditionError("audience profile must be nonempty")
    request = {
        "task": "audience",
        "audience_profile": audience_profile,
        "transcript": transcript.full_text,
        "audio_b64": base64.b64encode(user_audio).decode("ascii"),
    }
    audits = []
    last_error = None
    for attempt in range(2):
        try:
            outcome = provider.invoke(request)
        except (ProviderChainError, PermanentProviderError) as e:
            raise AudienceSimulationError(f"audience simulation failed: {e}") from e
        audits.append({"stage": "audience", "attempt": attempt + 1, **outcome.to_dict()})
        try:
            return _parse_audience_notes(outcome.payload, audience_profile), audits
        except ValueError as e:
            last_error = e
            request = {
                **request,
                "repair": f"Previous response was unusable ({e}). Reply with a JSON "
                "audience_notes list of objects with audience_profile, engagement "
                "(low|medium|high), comprehension (confused|partial|clear), "
                "confusion_points, reaction_summary.",
            }
    raise AudienceSimulationError(f"audience response unparseable after repair re-prompt: {last_error}")


def compose_feedback(
    analysis_text: str,
    metrics: DeliveryMetrics,
    audience_notes: list[AudienceNote],
    llm: ProviderClient,
) -> tuple[OISFeedback, list[dict]]:
    """Structured OIS feedback; one corrective re-prompt carrying the
    validation violations, then hard failure with both rejected drafts."""
    request = {
        "task": "feedback",
        "analysis": analysis_text,
        "metrics": metrics.to_dict(),
        "audience_notes": [n.to_dict() for n in audience_notes],
        "format": {
            "fields": ["encouragement", "observation", "impact", "suggestion"],
            "ois_word_limit": OIS_WORD_LIMIT,
        },
    }
    audits = []
    drafts = []
    for attempt in range(2):
        try:
            outcome = llm.invoke(request)
        except (ProviderChainError, PermanentProviderError) as e:
            raise FeedbackError(f"feedback generation failed: {e}", drafts) from e
        audits.append({"stage": "feedback", "attempt": attempt + 1, **outcome.to_dict()})
        draft = outcome.payload
        drafts.append(draft)
        violations = validate_ois(draft)
        if not violations:
            return OISFeedback.from_dict(draft), audits
        request = {**request, "violations": violations}
    raise FeedbackError(
        "feedback violated the OIS contract twice: " + "; ".join(violations), drafts
    )


def resolve_bundle(
    practice: PracticeRecording,
    exemplar: ExemplarVideo,
    script: NarrationScript,
    deck_slides: list[dict],
) -> FourSourceBundle:
    """Map the practice's slide range (default: whole deck) onto slide images,
    script segments and ideal audio via the exemplar linkage."""
    n = len(script.segments)
    lo, hi = practice.slide_range if practice.slide_range else (1, n)
    if not (1 <= lo <= hi <= n):
        raise PreconditionError(f"slide range {lo}..{hi} outside deck 1..{n}")
    images = [s["image_ref"] for s in deck_slides[lo - 1 : hi] if s.get("image_ref")]
    segments = [
        {"slide_index": s.slide_index, "text": s.text}
        for s in script.segments
        if lo <= s.slide_index <= hi
    ]
    audio_refs = [
        a.audio_ref for a in (exemplar.audio_segments or []) if lo <= a.slide_index <= hi
    ]
    return FourSourceBundle(
        slide_image_refs=images,
        script_segments=segments,
        ideal_audio_refs=audio_refs,
        user_audio_ref=practice.audio_ref,
    )


def analyze_practice(
    session: Session,
    practice: PracticeRecording,
    providers: ProviderSet,
    store: SessionStore,
    filler_lexicon: tuple[str, ...] = DEFAULT_FILLER_LEXICON,
    pause_params: PauseParams = PauseParams(),
) -> AnalysisReport:
    """Full coach pipeline: transcribe -> metrics -> multimodal analysis ->
    audience simulation -> OIS feedback. Any stage failure persists a partial
    report with a failure marker; the recording itself is never lost."""
    if session.stage is not Stage.COACHING:
        raise PreconditionError(f"analysis requires coaching stage, session is in {session.stage.value}")
    if not session.exemplar_ref:
        raise PreconditionError("session has no exemplar to compare against")

    report_id = new_id()
    partial: dict = {
        "id": report_id,
        "status": "failed",
        "practice_ref": practice.id,
        "created_at": utcnow().isoformat(),
        "provider_outcomes": [],
    }

    def fail(stage: str, error: Exception):
        partial["failed_stage"] = stage
        partial["error"] = str(error)
        store.write_doc("reports", report_id, partial)
        store.attach_analysis(session.id, report_id, practice.id)
        raise AnalysisError(f"analysis failed at stage {stage}: {error}") from error

    exemplar = ExemplarVideo.from_dict(store.read_doc("exemplars", session.exemplar_ref))
    script = NarrationScript.from_dict(store.read_doc("scripts", exemplar.script_ref))
    deck_doc = store.read_doc("decks", exemplar.deck_ref)
    user_audio = store.get_blob(BlobRef(practice.audio_ref, "wav", 1, practice.audio_ref))

    bundle = resolve_bundle(practice, exemplar, script, deck_doc["slides"])
    partial["inputs"] = bundle.to_dict()

    try:
        transcript, audit = transcribe(user_audio, providers["asr"])
        partial["provider_outcomes"].append(audit)
        partial["transcript"] = transcript.to_dict()
    except Exception as e:
        fail("asr", e)

    ideal_ms = sum(
        a.duration_ms for a in (exemplar.audio_segments or []) if a.audio_ref in bundle.ideal_audio_refs
    ) or exemplar.total_duration_ms
    try:
        metrics = compute_delivery_metrics(
            transcript, user_audio, filler_lexicon, ideal_duration_ms=ideal_ms, pause_params=pause_params
        )
        partial["metrics"] = metrics.to_dict()
    except Exception as e:
        fail("metrics", e)

    try:
        analysis_text, _hints, audit = run_multimodal_analysis(bundle, metrics, providers["mllm_analysis"])
        partial["provider_outcomes"].append(audit)
        partial["analysis_text"] = analysis_text
    except Exception as e:
        fail("mllm_analysis", e)

    profile = session.user_prompt or "general audience"
    degraded_audience = False
    try:
        audience_notes, audits = simulate_audience(user_audio, transcript, profile, providers["mllm_analysis"])
        partial["provider_outcomes"].extend(audits)
    except AudienceSimulationError as e:
        # analysis proceeds without notes, flagged degraded
        audience_notes = []
        degraded_audience = True
        partial["provider_outcomes"].append({"stage": "audience", "degraded": True, "error": str(e)})

    try:
        feedback, audits = compose_feedback(analysis_text, metrics, audience_notes, providers["llm_chat"])
        partial["provider_outcomes"].extend(audits)
    except Exception as e:
        fail("feedback", e)

    report = AnalysisReport(
        id=report_id,
        practice_ref=practice.id,
        inputs=bundle,
        metrics=metrics,
        transcript=transcript,
        audience_notes=audience_notes,
        feedback=feedback,
        created_at=utcnow(),
        provider_outcomes=partial["provider_outcomes"],
        analysis_text=analysis_text,
    )
    doc = report.to_dict()
    if degraded_audience:
        doc["audience_degraded"] = True
    store.write_doc("reports", report_id, doc)
    store.attach_analysis(session.id, report_id, practice.id)
    return report
