"""Command line entry points: `serve`, `pipeline run`, and `analyze`."""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import click

from .config import AppConfig
from .errors import PresentCoachError
from .jobs import JobEngine
from .providers import ProviderSet
from .store import BlobRef, SessionStore
from .video import ExemplarVideo


def _load_config(config_path, providers_path) -> AppConfig:
    try:
        return AppConfig.load(config_path, providers_path)
    except PresentCoachError as e:
        raise click.ClickException(f"bad configuration: {e}")


@click.group()
def main():
    """presentcoach: exemplar generation and practice coaching."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--static-dir", type=click.Path(file_okay=False), default=None, help="Built webapp bundle to serve at /")
def serve(config_path, providers_path, host, port, static_dir):
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    config = _load_config(config_path, providers_path)
    app = create_app(config, static_dir=Path(static_dir) if static_dir else None)
    uvicorn.run(app, host=host, port=port)


@main.group()
def pipeline():
    """Headless exemplar pipeline."""


@pipeline.command("run")
@click.option("--deck", "deck_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--voice", "voice_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", default="", help="Audience/objective prompt")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True, dir_okay=False), default=None)
def pipeline_run(deck_path, voice_path, prompt, out_dir, config_path, providers_path):
    """Generate an exemplar from a deck + voice sample, writing exemplar.mp4,
    manifest.json and script.json into --out. Exit code 0 only on completion."""
    from .deck import ingest_deck
    from .voice import prepare_voice_profile

    config = _load_config(config_path, providers_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.store_root = str(out / "store")
    store = SessionStore(config.store_root)
    providers = ProviderSet.from_config(config.providers)
    engine = JobEngine(store, providers, config)

    session = store.create_session(prompt)
    deck_bytes = Path(deck_path).read_bytes()
    deck = ingest_deck(deck_bytes, engine.renderer, store, min_width=config.min_render_width)
    store.attach_artifact(session.id, "deck", deck.id)

    voice_bytes = Path(voice_path).read_bytes()
    declared = Path(voice_path).suffix.lstrip(".").lower() or "wav"
    profile = prepare_voice_profile(
        voice_bytes, declared, store,
        target=config.audio, min_sample_ms=config.min_voice_sample_ms,
        ffmpeg_path=config.ffmpeg_path,
    )
    if profile.status != "ready":
        click.echo(f"note: {profile.message} Falling back to standard TTS.", err=True)
    store.attach_artifact(session.id, "voice", profile.id)

    job = engine.submit_exemplar(session.id)
    seen = -1
    for event in engine.follow_events(job.id, after_sequence=seen):
        label = event.step_name or "job"
        line = f"[{event.status:>9}] {label}"
        if event.detail:
            line += f" — {event.detail}"
        click.echo(line)
    job = engine.wait(job.id)
    (out / "session.json").write_text(json.dumps({"session_id": session.id}, indent=2))
    if job.overall != "completed":
        click.echo(f"pipeline failed: {job.overall}", err=True)
        sys.exit(1)

    session = store.load_session(session.id)
    exemplar = ExemplarVideo.from_dict(store.read_doc("exemplars", session.exemplar_ref))
    video_path = store.blob_path(BlobRef(exemplar.video_ref, "mp4", 1, exemplar.video_ref))
    shutil.copyfile(video_path, out / "exemplar.mp4")
    (out / "manifest.json").write_text(json.dumps(exemplar.manifest_dict(), indent=2))
    script_doc = store.read_doc("scripts", exemplar.script_ref)
    (out / "script.json").write_text(json.dumps(script_doc, indent=2))
    click.echo(f"exemplar written to {out}")


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Output directory of a previous `pipeline run`")
@click.option("--practice", "practice_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True, dir_okay=False), default=None)
def analyze(session_dir, practice_path, config_path, providers_path):
    """Analyze a practice recording against a generated exemplar; writes
    report.json next to the session."""
    from .coach import PracticeRecording
    from .store import new_id, utcnow
    from .voice import normalize_audio
    from . import wav as wavmod

    config = _load_config(config_path, providers_path)
    session_dir = Path(session_dir)
    config.store_root = str(session_dir / "store")
    pointer = session_dir / "session.json"
    if not pointer.exists():
        raise click.ClickException(f"{session_dir} does not contain a session.json pointer")
    session_id = json.loads(pointer.read_text())["session_id"]

    store = SessionStore(config.store_root)
    providers = ProviderSet.from_config(config.providers)
    engine = JobEngine(store, providers, config)

    data = Path(practice_path).read_bytes()
    declared = Path(practice_path).suffix.lstrip(".").lower() or "wav"
    normalized = normalize_audio(data, declared, config.audio, config.ffmpeg_path)
    practice = PracticeRecording(
        id=new_id(),
        session_ref=session_id,
        audio_ref=store.put_blob(normalized, "wav").content_hash,
        duration_ms=wavmod.measure_duration_ms(normalized),
        recorded_at=utcnow(),
    )
    store.write_doc("practices", practice.id, practice.to_dict())
    store.attach_artifact(session_id, "practice", practice.id)

    job = engine.submit_analysis(practice.id)
    for event in engine.follow_events(job.id):
        label = event.step_name or "job"
        click.echo(f"[{event.status:>9}] {label}" + (f" — {event.detail}" if event.detail else ""))
    job = engine.wait(job.id)
    session = store.load_session(session_id)
    if not session.analysis_refs:
        click.echo("analysis produced no report", err=True)
        sys.exit(1)
    report = store.read_doc("reports", session.analysis_refs[-1])
    (session_dir / "report.json").write_text(json.dumps(report, indent=2))
    click.echo(f"report written to {session_dir / 'report.json'}")
    if job.overall != "completed" or report.get("status") != "complete":
        sys.exit(1)


if __name__ == "__main__":
    main()
