"""HTTP service: uploads, pipeline jobs with SSE progress, artifact retrieval,
analysis, and chat. Error responses share one body shape:
{"code", "message", "detail"}."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import FileResponse, PlainTextResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .chat import ChatService, build_chat_context
from .coach import PracticeRecording
from .config import AppConfig
from .deck import DeckValidationError, SlideDeck, ingest_deck
from .errors import (
    BusyError,
    InputValidationError,
    NotFoundError,
    PreconditionError,
    PresentCoachError,
    StateError,
)
from .jobs import JobEngine
from .providers import ProviderError, ProviderSet
from .store import BlobRef, SessionStore, new_id, utcnow
from .video import ExemplarVideo
from .voice import normalize_audio, prepare_voice_profile
from . import wav as wavmod

_STATUS_BY_CODE = {
    "not_found": 404,
    "state": 409,
    "busy": 409,
    "precondition": 409,
    "validation": 422,
    "persistence": 500,
    "provider": 502,
}


def _error_response(exc: PresentCoachError, status: Optional[int] = None) -> Response:
    status = status or _STATUS_BY_CODE.get(exc.code, 500)
    body = {"code": exc.code, "message": str(exc), "detail": getattr(exc, "reason", None)}
    return Response(json.dumps(body), status_code=status, media_type="application/json")


class SessionCreate(BaseModel):
    user_prompt: str = ""


class PromptUpdate(BaseModel):
    user_prompt: str


class ChatSend(BaseModel):
    message: str


def create_app(
    config: Optional[AppConfig] = None,
    store: Optional[SessionStore] = None,
    providers: Optional[ProviderSet] = None,
    engine: Optional[JobEngine] = None,
    static_dir: Optional[Path] = None,
) -> FastAPI:
    config = config or AppConfig()
    store = store or SessionStore(config.store_root)
    providers = providers or ProviderSet.from_config(config.providers)
    engine = engine or JobEngine(store, providers, config)
    chat_service = ChatService(store, providers, config.chat_budget_chars)

    app = FastAPI(title="presentcoach", version="0.1.0")
    app.state.store = store
    app.state.engine = engine
    app.state.config = config

    @app.exception_handler(PresentCoachError)
    async def handle_domain_error(request: Request, exc: PresentCoachError):
        if isinstance(exc, DeckValidationError) and exc.reason == "oversize":
            return _error_response(exc, 413)
        return _error_response(exc)

    # ---- sessions ---------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    def create_session(body: SessionCreate = None):
        session = store.create_session(body.user_prompt if body else "")
        return session.to_dict()

    @app.get("/api/sessions")
    def list_sessions():
        return [
            {
                "id": s.id,
                "created_at": s.created_at.isoformat(),
                "stage": s.stage.value,
                "user_prompt": s.user_prompt,
            }
            for s in store.list_sessions()
        ]

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return store.load_session(session_id).to_dict()

    @app.put("/api/sessions/{session_id}/prompt")
    def set_prompt(session_id: str, body: PromptUpdate):
        return store.set_user_prompt(session_id, body.user_prompt).to_dict()

    # ---- uploads ----------------------------------------------------------

    @app.post("/api/sessions/{session_id}/deck")
    async def upload_deck(session_id: str, file: UploadFile):
        store.load_session(session_id)
        data = await file.read()
        if len(data) > config.deck_cap_bytes:
            raise DeckValidationError("oversize", f"deck exceeds {config.deck_cap_bytes} byte cap")
        deck = ingest_deck(data, engine.renderer, store, min_width=config.min_render_width)
        store.attach_artifact(session_id, "deck", deck.id)
        return {
            "deck_id": deck.id,
            "slide_count": deck.slide_count,
            "preview_urls": [
                f"/api/decks/{deck.id}/slides/{s.index}.png" for s in deck.slides
            ],
            "slides": [
                {"index": s.index, "title": s.title, "parse_error": s.parse_error}
                for s in deck.slides
            ],
        }

    @app.get("/api/decks/{deck_id}/slides/{index}.png")
    def slide_image(deck_id: str, index: int):
        deck = SlideDeck.from_dict(store.read_doc("decks", deck_id))
        for slide in deck.slides:
            if slide.index == index and slide.image_ref:
                data = store.get_blob(BlobRef(slide.image_ref, "png", 1, slide.image_ref))
                return Response(data, media_type="image/png")
        raise NotFoundError(f"slide {index} of deck {deck_id} not found")

    @app.post("/api/sessions/{session_id}/voice")
    async def upload_voice(session_id: str, file: UploadFile):
        store.load_session(session_id)
        data = await file.read()
        if len(data) > config.audio_cap_bytes:
            raise InputValidationError(f"audio exceeds {config.audio_cap_bytes} byte cap")
        declared = (file.filename or "sample.wav").rsplit(".", 1)[-1].lower()
        profile = prepare_voice_profile(
            data,
            declared,
            store,
            target=config.audio,
            min_sample_ms=config.min_voice_sample_ms,
            ffmpeg_path=config.ffmpeg_path,
        )
        store.attach_artifact(session_id, "voice", profile.id)
        return profile.to_dict()

    # ---- generation -------------------------------------------------------

    @app.post("/api/sessions/{session_id}/generate", status_code=202)
    def generate(session_id: str):
        job = engine.submit_exemplar(session_id)
        return job.to_dict()

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return engine.load_job(job_id).to_dict()

    @app.get("/api/jobs/{job_id}/events")
    def job_events(job_id: str, request: Request, last_event_id: Optional[int] = None):
        header = request.headers.get("last-event-id")
        after = last_event_id if last_event_id is not None else (int(header) if header else -1)

        def stream():
            for event in engine.follow_events(job_id, after_sequence=after):
                payload = json.dumps(event.to_dict())
                yield f"id: {event.sequence}\nevent: progress\ndata: {payload}\n\n"
            yield "event: end\ndata: {}\n\n"

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    # ---- exemplar artifacts -----------------------------------------------

    def _exemplar(session_id: str) -> ExemplarVideo:
        session = store.load_session(session_id)
        if not session.exemplar_ref:
            raise NotFoundError(f"session {session_id} has no exemplar yet")
        return ExemplarVideo.from_dict(store.read_doc("exemplars", session.exemplar_ref))

    @app.get("/api/sessions/{session_id}/exemplar")
    def exemplar_video(session_id: str):
        ex = _exemplar(session_id)
        path = store.blob_path(BlobRef(ex.video_ref, "mp4", 1, ex.video_ref))
        if not path.exists():
            raise NotFoundError("exemplar video blob missing")
        return FileResponse(path, media_type="video/mp4")

    @app.get("/api/sessions/{session_id}/exemplar/manifest")
    def exemplar_manifest(session_id: str):
        return _exemplar(session_id).manifest_dict()

    @app.get("/api/sessions/{session_id}/exemplar/script")
    def exemplar_script(session_id: str, format: str = "text"):
        ex = _exemplar(session_id)
        from .script import NarrationScript

        script = NarrationScript.from_dict(store.read_doc("scripts", ex.script_ref))
        if format == "json":
            return script.to_dict()
        return PlainTextResponse(script.as_text())

    # ---- practice + analysis ----------------------------------------------

    @app.post("/api/sessions/{session_id}/practice", status_code=201)
    async def upload_practice(
        session_id: str,
        file: UploadFile,
        slide_from: Optional[int] = None,
        slide_to: Optional[int] = None,
    ):
        store.load_session(session_id)
        data = await file.read()
        if len(data) > config.audio_cap_bytes:
            raise InputValidationError(f"audio exceeds {config.audio_cap_bytes} byte cap")
        declared = (file.filename or "practice.wav").rsplit(".", 1)[-1].lower()
        normalized = normalize_audio(data, declared, config.audio, config.ffmpeg_path)
        ref = store.put_blob(normalized, "wav")
        slide_range = None
        if slide_from is not None and slide_to is not None:
            slide_range = (slide_from, slide_to)
        practice = PracticeRecording(
            id=new_id(),
            session_ref=session_id,
            audio_ref=ref.content_hash,
            duration_ms=wavmod.measure_duration_ms(normalized),
            recorded_at=utcnow(),
            slide_range=slide_range,
        )
        store.write_doc("practices", practice.id, practice.to_dict())
        store.attach_artifact(session_id, "practice", practice.id)
        return practice.to_dict()

    @app.post("/api/practice/{practice_id}/analyze", status_code=202)
    def analyze(practice_id: str):
        job = engine.submit_analysis(practice_id)
        return job.to_dict()

    @app.get("/api/practice/{practice_id}/report")
    def get_report(practice_id: str):
        store.read_doc("practices", practice_id)  # 404 for unknown practice
        reports = []
        for report_id in store.list_doc_ids("reports"):
            doc = store.read_doc("reports", report_id)
            if doc.get("practice_ref") == practice_id:
                reports.append(doc)
        if not reports:
            raise NotFoundError(f"no report for practice {practice_id}")
        reports.sort(key=lambda d: d.get("created_at", ""))
        return reports[-1]

    # ---- chat -------------------------------------------------------------

    @app.post("/api/sessions/{session_id}/chat")
    def chat_send(session_id: str, body: ChatSend):
        try:
            reply = chat_service.send_message(session_id, body.message)
        except ProviderError as e:
            return Response(
                json.dumps(
                    {
                        "code": "provider",
                        "message": "coach reply failed; your message was kept with a delivery-failed marker",
                        "detail": str(e),
                    }
                ),
                status_code=502,
                media_type="application/json",
            )
        return reply.to_dict()

    @app.get("/api/sessions/{session_id}/chat")
    def chat_history(session_id: str):
        session = store.load_session(session_id)
        return {"messages": [m.to_dict() for m in session.chat_history]}

    @app.get("/api/sessions/{session_id}/chat/context")
    def chat_context(session_id: str, budget_chars: Optional[int] = None):
        session = store.load_session(session_id)
        ctx = build_chat_context(session, store, budget_chars or config.chat_budget_chars)
        return {
            "budget_chars": ctx.budget_chars,
            "serialized_length": ctx.serialized_length(),
            "included_reports": len(ctx.included_reports),
            "included_messages": len(ctx.included_messages),
        }

    # ---- static frontend (production mode) --------------------------------

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webapp")

    return app
