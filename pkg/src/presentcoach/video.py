"""Exemplar video assembly: one still-image-plus-audio segment per slide,
lossless concatenation, and a contiguous slide-to-time manifest."""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import AssemblyError, PreconditionError, SyncError
from .media import MediaToolchain, VideoSpec
from .store import SessionStore, new_id
from .voice import AudioSegment

SEGMENT_PROBE_TOLERANCE_MS = 100


@dataclass(frozen=True)
class TimelineEntry:
    slide_index: int
    start_ms: int
    end_ms: int

    def to_dict(self) -> dict:
        return {"slide_index": self.slide_index, "start_ms": self.start_ms, "end_ms": self.end_ms}

    @classmethod
    def from_dict(cls, d: dict) -> "TimelineEntry":
        return cls(d["slide_index"], d["start_ms"], d["end_ms"])


@dataclass
class ExemplarVideo:
    id: str
    video_ref: str
    manifest: list[TimelineEntry]
    total_duration_ms: int
    width: int
    height: int
    fps: int
    # pipeline linkage used by coach analysis (ideal audio + script per slide)
    deck_ref: Optional[str] = None
    script_ref: Optional[str] = None
    audio_segments: list[AudioSegment] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "video_ref": self.video_ref,
            "manifest": [e.to_dict() for e in self.manifest],
            "total_duration_ms": self.total_duration_ms,
            "resolution": {"width": self.width, "height": self.height},
            "fps": self.fps,
            "deck_ref": self.deck_ref,
            "script_ref": self.script_ref,
            "audio_segments": [a.to_dict() for a in self.audio_segments] if self.audio_segments else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExemplarVideo":
        return cls(
            id=d["id"],
            video_ref=d["video_ref"],
            manifest=[TimelineEntry.from_dict(e) for e in d["manifest"]],
            total_duration_ms=d["total_duration_ms"],
            width=d["resolution"]["width"],
            height=d["resolution"]["height"],
            fps=d["fps"],
            deck_ref=d.get("deck_ref"),
            script_ref=d.get("script_ref"),
            audio_segments=[AudioSegment.from_dict(a) for a in d["audio_segments"]] if d.get("audio_segments") else None,
        )

    def manifest_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.manifest],
            "total_duration_ms": self.total_duration_ms,
        }


def build_manifest(durations_ms: list[int], gap_ms: int = 0) -> list[TimelineEntry]:
    """Prefix-sum manifest over per-slide durations; an optional configured
    gap inserts silence between slides and shifts later entries."""
    entries = []
    cursor = 0
    for i, d in enumerate(durations_ms, start=1):
        if d <= 0:
            raise PreconditionError(f"segment {i} has non-positive duration {d}")
        entries.append(TimelineEntry(slide_index=i, start_ms=cursor, end_ms=cursor + d))
        cursor += d + (gap_ms if i < len(durations_ms) else 0)
    return entries


def validate_timeline(manifest: list[TimelineEntry]) -> list[str]:
    """Empty list means the manifest satisfies the timeline contract."""
    violations = []
    if not manifest:
        return ["manifest is empty"]
    if manifest[0].start_ms != 0:
        violations.append(f"entry 1 starts at {manifest[0].start_ms}, expected 0")
    for i, e in enumerate(manifest):
        if e.end_ms <= e.start_ms:
            violations.append(f"entry {e.slide_index} has non-positive span")
        if e.slide_index != i + 1:
            violations.append(f"entry {i + 1} carries slide_index {e.slide_index}")
    for prev, cur in zip(manifest, manifest[1:]):
        if cur.start_ms > prev.end_ms:
            violations.append(
                f"gap at boundary {prev.slide_index}->{cur.slide_index} "
                f"({prev.end_ms} -> {cur.start_ms})"
            )
        elif cur.start_ms < prev.end_ms:
            violations.append(
                f"overlap at boundary {prev.slide_index}->{cur.slide_index} "
                f"({prev.end_ms} -> {cur.start_ms})"
            )
    return violations


def compose_slide_segment(
    image_png: bytes,
    audio: AudioSegment,
    spec: VideoSpec,
    toolchain: MediaToolchain,
    workdir: Path,
    audio_wav: bytes = b"",
) -> tuple[Path, int]:
    """Render one still-image segment; verifies the probed duration against
    the audio duration within tolerance."""
    if audio.duration_ms <= 0:
        raise PreconditionError(f"slide {audio.slide_index}: zero-duration audio")
    img_path = workdir / f"slide-{audio.slide_index}.png"
    wav_path = workdir / f"slide-{audio.slide_index}.wav"
    out_path = workdir / f"segment-{audio.slide_index}.mp4"
    img_path.write_bytes(image_png)
    wav_path.write_bytes(audio_wav)
    toolchain.compose_still_video(img_path, wav_path, out_path, spec)
    info = toolchain.probe(out_path)
    if abs(info.duration_ms - audio.duration_ms) > SEGMENT_PROBE_TOLERANCE_MS:
        raise SyncError(
            f"slide {audio.slide_index}: segment probes {info.duration_ms} ms, "
            f"audio is {audio.duration_ms} ms"
        )
    return out_path, audio.duration_ms


def assemble_exemplar(
    segments: list[tuple[bytes, AudioSegment, bytes]],
    spec: VideoSpec,
    toolchain: MediaToolchain,
    store: SessionStore,
    gap_ms: int = 0,
    workdir: Optional[Path] = None,
    on_progress=None,
) -> ExemplarVideo:
    """segments: ordered (slide PNG bytes, AudioSegment, audio WAV bytes).
    Concatenates per-slide segments and persists the exemplar + manifest."""
    if not segments:
        raise PreconditionError("cannot assemble an exemplar from zero segments")
    own_tmp = workdir is None
    work = Path(tempfile.mkdtemp(prefix="exemplar-")) if own_tmp else workdir
    try:
        seg_paths = []
        durations = []
        for i, (png, audio, audio_wav) in enumerate(segments, start=1):
            if audio.slide_index != i:
                raise PreconditionError(f"segments out of order: position {i} holds slide {audio.slide_index}")
            path, duration = compose_slide_segment(png, audio, spec, toolchain, work, audio_wav)
            seg_paths.append(path)
            durations.append(duration)
            if on_progress:
                on_progress(i, len(segments))
        out_path = work / "exemplar.mp4"
        toolchain.concat(seg_paths, out_path)
        manifest = build_manifest(durations, gap_ms=gap_ms)
        total = manifest[-1].end_ms
        info = toolchain.probe(out_path)
        if abs(info.duration_ms - total) > SEGMENT_PROBE_TOLERANCE_MS * len(segments):
            raise SyncError(
                f"assembled video probes {info.duration_ms} ms, manifest total is {total} ms"
            )
        video_ref = store.put_blob(out_path.read_bytes(), "mp4")
        exemplar = ExemplarVideo(
            id=new_id(),
            video_ref=video_ref.content_hash,
            manifest=manifest,
            total_duration_ms=total,
            width=spec.width,
            height=spec.height,
            fps=spec.fps,
        )
        store.write_doc("exemplars", exemplar.id, exemplar.to_dict())
        return exemplar
    finally:
        if own_tmp:
            import shutil

            shutil.rmtree(work, ignore_errors=True)
