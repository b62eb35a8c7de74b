"""Observable pipeline jobs: persisted job records, ordered progress events
with sequence-based replay, a small worker pool, and crash recovery.

Events are appended to a per-job JSONL file as they happen; subscribers replay
from any sequence number and then follow the file until the job is terminal,
which makes reconnect semantics exact even across process restarts.
"""

from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator, Optional

from .coach import PracticeRecording, analyze_practice
from .config import AppConfig
from .deck import SlideDeck, TestRenderer, SubprocessRenderer, ingest_deck
from .errors import BusyError, NotFoundError, PresentCoachError, StateError
from .media import MediaToolchain, default_toolchain
from .providers import ProviderSet
from .script import generate_script
from .store import BlobRef, SessionStore, Stage, new_id, utcnow
from .video import assemble_exemplar, compose_slide_segment
from .voice import BatchSynthesisError, VoiceProfile, synthesize_batch

EXEMPLAR_STEPS = (
    "Parsing slide content",
    "Generating narration script",
    "Synthesizing audio track",
    "Assembling video",
)

ANALYSIS_STEPS = ("Analyzing practice recording",)


@dataclass
class JobStep:
    name: str
    status: str = "pending"  # pending | running | done | failed
    started_at: Optional[str] = None
    ended_at: Optional[str] = None
    detail: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JobStep":
        return cls(d["name"], d["status"], d.get("started_at"), d.get("ended_at"), d.get("detail"))


@dataclass
class PipelineJob:
    id: str
    session_ref: str
    kind: str  # exemplar_generation | practice_analysis
    steps: list[JobStep]
    overall: str = "queued"  # queued | running | completed | failed
    created_at: str = ""
    practice_ref: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "session_ref": self.session_ref,
            "kind": self.kind,
            "steps": [s.to_dict() for s in self.steps],
            "overall": self.overall,
            "created_at": self.created_at,
            "practice_ref": self.practice_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineJob":
        return cls(
            id=d["id"],
            session_ref=d["session_ref"],
            kind=d["kind"],
            steps=[JobStep.from_dict(s) for s in d["steps"]],
            overall=d["overall"],
            created_at=d.get("created_at", ""),
            practice_ref=d.get("practice_ref"),
        )


@dataclass(frozen=True)
class ProgressEvent:
    job_id: str
    sequence: int
    step_name: str
    status: str
    timestamp: str
    detail: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "job_id": self.job_id,
            "sequence": self.sequence,
            "step_name": self.step_name,
            "status": self.status,
            "timestamp": self.timestamp,
        }
        if self.detail is not None:
            d["detail"] = self.detail
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProgressEvent":
        return cls(d["job_id"], d["sequence"], d["step_name"], d["status"], d["timestamp"], d.get("detail"))


class JobEngine:
    def __init__(
        self,
        store: SessionStore,
        providers: ProviderSet,
        config: Optional[AppConfig] = None,
        toolchain: Optional[MediaToolchain] = None,
        renderer=None,
    ):
        self.store = store
        self.providers = providers
        self.config = config or AppConfig()
        self.toolchain = toolchain or default_toolchain(self.config.ffmpeg_path)
        if renderer is not None:
            self.renderer = renderer
        elif self.config.renderer_command:
            self.renderer = SubprocessRenderer(self.config.renderer_command)
        else:
            self.renderer = TestRenderer(self.config.min_render_width, self.config.video.height)
        self._pool = ThreadPoolExecutor(max_workers=max(1, self.config.job_workers))
        self._lock = threading.Lock()
        self._active: dict[str, str] = {}  # "session:kind" -> job_id
        self._sequences: dict[str, int] = {}
        self._futures: dict[str, object] = {}
        self.recover()

    # ---- persistence ------------------------------------------------------

    def _save(self, job: PipelineJob) -> None:
        self.store.write_doc("jobs", job.id, job.to_dict())

    def load_job(self, job_id: str) -> PipelineJob:
        return PipelineJob.from_dict(self.store.read_doc("jobs", job_id))

    def _events_path(self, job_id: str):
        return self.store.root / "jobs" / f"{job_id}.events.jsonl"

    def emit(self, job: PipelineJob, step_name: str, status: str, detail: Optional[str] = None) -> ProgressEvent:
        # sequence allocation and the append must be one critical section so
        # concurrent emitters cannot interleave out of order in the file
        with self._lock:
            seq = self._sequences.get(job.id, -1) + 1
            self._sequences[job.id] = seq
            event = ProgressEvent(
                job_id=job.id,
                sequence=seq,
                step_name=step_name,
                status=status,
                timestamp=utcnow().isoformat(),
                detail=detail,
            )
            with open(self._events_path(job.id), "a") as f:
                f.write(json.dumps(event.to_dict()) + "\n")
                f.flush()
                os.fsync(f.fileno())
        return event

    def read_events(self, job_id: str, after_sequence: int = -1) -> list[ProgressEvent]:
        path = self._events_path(job_id)
        events = []
        if path.exists():
            for line in path.read_text().splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from a crash
                if doc["sequence"] > after_sequence:
                    events.append(ProgressEvent.from_dict(doc))
        return events

    def follow_events(
        self, job_id: str, after_sequence: int = -1, poll_s: float = 0.05, timeout_s: float = 600
    ) -> Iterator[ProgressEvent]:
        """Replay persisted events past `after_sequence`, then follow until the
        job reaches a terminal state."""
        self.load_job(job_id)  # raises NotFoundError for unknown ids
        cursor = after_sequence
        deadline = time.monotonic() + timeout_s
        while True:
            for event in self.read_events(job_id, cursor):
                cursor = event.sequence
                yield event
            job = self.load_job(job_id)
            if job.overall in ("completed", "failed"):
                for event in self.read_events(job_id, cursor):
                    cursor = event.sequence
                    yield event
                return
            if time.monotonic() > deadline:
                return
            time.sleep(poll_s)

    # ---- recovery ---------------------------------------------------------

    def recover(self) -> list[str]:
        """Mark jobs interrupted by a crash as failed and revert their
        sessions; called on engine startup."""
        recovered = []
        for job_id in self.store.list_doc_ids("jobs"):
            if job_id.endswith(".events"):
                continue
            try:
                job = self.load_job(job_id)
            except (NotFoundError, json.JSONDecodeError):
                continue
            if job.overall not in ("queued", "running"):
                continue
            for step in job.steps:
                if step.status == "running":
                    step.status = "failed"
                    step.ended_at = utcnow().isoformat()
                    step.detail = "interrupted by service restart"
            job.overall = "failed"
            self._save(job)
            events = self.read_events(job_id)
            self._sequences[job_id] = events[-1].sequence if events else -1
            self.emit(job, "", "failed", "interrupted by service restart")
            try:
                session = self.store.load_session(job.session_ref)
                if session.stage is Stage.GENERATING:
                    self.store.transition_stage(job.session_ref, Stage.SETUP)
            except (NotFoundError, PresentCoachError):
                pass
            recovered.append(job_id)
        return recovered

    # ---- submission -------------------------------------------------------

    def submit_exemplar(self, session_id: str) -> PipelineJob:
        session = self.store.load_session(session_id)
        key = f"{session_id}:exemplar_generation"
        with self._lock:
            if key in self._active:
                raise BusyError("an exemplar generation job is already running for this session")
            if session.stage is not Stage.SETUP:
                raise StateError(
                    f"generation starts from setup stage; session is in {session.stage.value}"
                )
            job = PipelineJob(
                id=new_id(),
                session_ref=session_id,
                kind="exemplar_generation",
                steps=[JobStep(name) for name in EXEMPLAR_STEPS],
                created_at=utcnow().isoformat(),
            )
            self._active[key] = job.id
            self._sequences[job.id] = -1
        try:
            # raises PreconditionError when deck/voice are missing
            self.store.transition_stage(session_id, Stage.GENERATING)
        except PresentCoachError:
            with self._lock:
                self._active.pop(key, None)
            raise
        self._save(job)
        self._futures[job.id] = self._pool.submit(self._run_exemplar, job)
        return job

    def submit_analysis(self, practice_id: str) -> PipelineJob:
        practice = PracticeRecording.from_dict(self.store.read_doc("practices", practice_id))
        key = f"practice:{practice_id}"
        with self._lock:
            if key in self._active:
                raise BusyError("an analysis job is already running for this recording")
            job = PipelineJob(
                id=new_id(),
                session_ref=practice.session_ref,
                kind="practice_analysis",
                steps=[JobStep(name) for name in ANALYSIS_STEPS],
                created_at=utcnow().isoformat(),
                practice_ref=practice_id,
            )
            self._active[key] = job.id
            self._sequences[job.id] = -1
        self._save(job)
        self._futures[job.id] = self._pool.submit(self._run_analysis, job, practice)
        return job

    def wait(self, job_id: str, timeout_s: float = 120) -> PipelineJob:
        future = self._futures.get(job_id)
        if future is not None:
            future.result(timeout=timeout_s)
        return self.load_job(job_id)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)

    # ---- step helpers -----------------------------------------------------

    def _start_step(self, job: PipelineJob, index: int) -> None:
        step = job.steps[index]
        self.emit(job, step.name, "pending")
        step.status = "running"
        step.started_at = utcnow().isoformat()
        self._save(job)
        self.emit(job, step.name, "running")

    def _finish_step(self, job: PipelineJob, index: int, detail: Optional[str] = None) -> None:
        step = job.steps[index]
        step.status = "done"
        step.ended_at = utcnow().isoformat()
        step.detail = detail
        self._save(job)
        self.emit(job, step.name, "done", detail)

    def _fail(self, job: PipelineJob, index: int, error: Exception) -> None:
        step = job.steps[index]
        step.status = "failed"
        step.ended_at = utcnow().isoformat()
        step.detail = str(error)
        job.overall = "failed"
        self._save(job)
        self.emit(job, step.name, "failed", str(error))
        self.emit(job, "", "failed", str(error))

    # ---- pipelines --------------------------------------------------------

    def _run_exemplar(self, job: PipelineJob) -> None:
        session_id = job.session_ref
        key = f"{session_id}:exemplar_generation"
        try:
            job.overall = "running"
            self._save(job)
            session = self.store.load_session(session_id)

            # step 1: parsing slide content
            self._start_step(job, 0)
            try:
                deck = self._load_or_ingest_deck(session)
            except PresentCoachError as e:
                self._fail(job, 0, e)
                self._revert(session_id)
                return
            self._finish_step(job, 0, f"{deck.slide_count} slides")

            # step 2: narration script
            self._start_step(job, 1)
            try:
                script = generate_script(
                    deck,
                    session.user_prompt,
                    self.providers["vlm_script"],
                    store=self.store,
                    max_regenerations=self.config.max_script_regenerations,
                    on_progress=lambda i, n: self.emit(
                        job, EXEMPLAR_STEPS[1], "running", f"slide {i}/{n}"
                    ),
                )
            except PresentCoachError as e:
                self._fail(job, 1, e)
                self._revert(session_id)
                return
            self.store.write_doc("scripts", script.deck_ref, script.to_dict())
            self._finish_step(job, 1, f"{len(script.segments)} segments")

            # step 3: audio synthesis
            self._start_step(job, 2)
            profile = VoiceProfile.from_dict(self.store.read_doc("voices", session.voice_profile_ref))
            try:
                audio_segments = synthesize_batch(
                    script,
                    profile,
                    self.providers,
                    self.store,
                    target=self.config.audio,
                    parallelism=self.config.synthesis_parallelism,
                    on_progress=lambda i, n: self.emit(
                        job, EXEMPLAR_STEPS[2], "running", f"segment {i}/{n}"
                    ),
                )
            except BatchSynthesisError as e:
                self._fail(job, 2, e)
                self._revert(session_id)
                return
            degraded = [a.slide_index for a in audio_segments if a.synthesis_mode == "fallback_tts"]
            detail = None
            if degraded:
                detail = "degraded synthesis: standard TTS used for slide(s) " + ", ".join(
                    str(i) for i in degraded
                )
            self._finish_step(job, 2, detail)

            # step 4: video assembly
            self._start_step(job, 3)
            try:
                segments = []
                for slide, audio in zip(deck.slides, audio_segments):
                    png = self.store.get_blob(BlobRef(slide.image_ref, "png", 1, slide.image_ref))
                    wav_bytes = self.store.get_blob(BlobRef(audio.audio_ref, "wav", 1, audio.audio_ref))
                    segments.append((png, audio, wav_bytes))
                exemplar = assemble_exemplar(
                    segments,
                    self.config.video,
                    self.toolchain,
                    self.store,
                    gap_ms=self.config.slide_gap_ms,
                    on_progress=lambda i, n: self.emit(
                        job, EXEMPLAR_STEPS[3], "running", f"segment {i}/{n}"
                    ),
                )
            except PresentCoachError as e:
                self._fail(job, 3, e)
                self._revert(session_id)
                return
            exemplar.deck_ref = deck.id
            exemplar.script_ref = script.deck_ref
            exemplar.audio_segments = audio_segments
            self.store.write_doc("exemplars", exemplar.id, exemplar.to_dict())
            self.store.attach_artifact(session_id, "exemplar", exemplar.id)
            self._finish_step(job, 3, f"{exemplar.total_duration_ms} ms")

            self.store.transition_stage(session_id, Stage.COACHING)
            job.overall = "completed"
            self._save(job)
            self.emit(job, "", "completed")
        except Exception as e:  # defensive: never leave a job dangling
            job.overall = "failed"
            self._save(job)
            self.emit(job, "", "failed", f"unexpected error: {e}")
            self._revert(session_id)
        finally:
            with self._lock:
                self._active.pop(key, None)

    def _load_or_ingest_deck(self, session) -> SlideDeck:
        if not session.deck_ref:
            raise StateError("session has no deck attached")
        doc = self.store.read_doc("decks", session.deck_ref)
        return SlideDeck.from_dict(doc)

    def _revert(self, session_id: str) -> None:
        try:
            session = self.store.load_session(session_id)
            if session.stage is Stage.GENERATING:
                self.store.transition_stage(session_id, Stage.SETUP)
        except PresentCoachError:
            pass

    def _run_analysis(self, job: PipelineJob, practice: PracticeRecording) -> None:
        key = f"practice:{practice.id}"
        try:
            job.overall = "running"
            self._save(job)
            self._start_step(job, 0)
            session = self.store.load_session(job.session_ref)
            try:
                report = analyze_practice(
                    session,
                    practice,
                    self.providers,
                    self.store,
                    filler_lexicon=self.config.filler_lexicon,
                    pause_params=self.config.pause_params,
                )
            except PresentCoachError as e:
                self._fail(job, 0, e)
                return
            self._finish_step(job, 0, f"report {report.id}")
            job.overall = "completed"
            self._save(job)
            self.emit(job, "", "completed")
        except Exception as e:
            job.overall = "failed"
            self._save(job)
            self.emit(job, "", "failed", f"unexpected error: {e}")
        finally:
            with self._lock:
                self._active.pop(key, None)
