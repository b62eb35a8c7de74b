"""Voice sample normalization, clone-profile management, and per-segment
speech synthesis with standard-TTS fallback.

WAV handling is native (see wav.py); WebM/M4A container conversion is
delegated to the external media toolchain (FFmpeg) when one is available.
"""

from __future__ import annotations

import base64
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import resample_poly

from . import wav
from .errors import ConversionError, InputValidationError, PresentCoachError
from .providers import ProviderChainError, ProviderClient, ProviderSet
from .script import NarrationScript, ScriptSegment
from .store import SessionStore, new_id

REFERENCE_TEXT = "This is a sample text for voice cloning"
DEFAULT_MIN_SAMPLE_MS = 3000
DEFAULT_BATCH_PARALLELISM = 4


@dataclass(frozen=True)
class AudioSpec:
    sample_rate_hz: int = 16000
    channels: int = 1
    bits_per_sample: int = 16


@dataclass
class VoiceProfile:
    id: str
    sample_ref: str  # blob hash of the normalized wav
    original_format: str  # webm | m4a | wav
    sample_duration_ms: int
    reference_text: str
    status: str  # ready | invalid
    message: Optional[str] = None  # user-facing reason when invalid

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sample_ref": self.sample_ref,
            "original_format": self.original_format,
            "sample_duration_ms": self.sample_duration_ms,
            "reference_text": self.reference_text,
            "status": self.status,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoiceProfile":
        return cls(
            d["id"], d["sample_ref"], d["original_format"], d["sample_duration_ms"],
            d["reference_text"], d["status"], d.get("message"),
        )


@dataclass
class AudioSegment:
    slide_index: int
    audio_ref: str
    duration_ms: int
    sample_rate_hz: int
    channels: int
    synthesis_mode: str  # cloned | fallback_tts

    def to_dict(self) -> dict:
        return {
            "slide_index": self.slide_index,
            "audio_ref": self.audio_ref,
            "duration_ms": self.duration_ms,
            "sample_rate_hz": self.sample_rate_hz,
            "channels": self.channels,
            "synthesis_mode": self.synthesis_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AudioSegment":
        return cls(
            d["slide_index"], d["audio_ref"], d["duration_ms"],
            d["sample_rate_hz"], d["channels"], d["synthesis_mode"],
        )


class SynthesisError(PresentCoachError):
    code = "synthesis"

    def __init__(self, slide_index: int, message: str):
        super().__init__(f"slide {slide_index}: {message}")
        self.slide_index = slide_index


class BatchSynthesisError(PresentCoachError):
    code = "synthesis"

    def __init__(self, failures: dict[int, str], partial: list[AudioSegment]):
        indices = ", ".join(str(i) for i in sorted(failures))
        super().__init__(f"synthesis failed for slide(s) {indices}")
        self.failures = failures
        self.partial = partial


_MAGIC = {
    "wav": lambda d: d[:4] == b"RIFF" and d[8:12] == b"WAVE",
    "webm": lambda d: d[:4] == b"\x1aE\xdf\xa3",
    "m4a": lambda d: len(d) > 11 and d[4:8] == b"ftyp",
}


def sniff_format(data: bytes, declared: str) -> str:
    if declared not in _MAGIC:
        raise InputValidationError(f"unsupported audio container {declared!r}")
    if not _MAGIC[declared](data):
        for kind, check in _MAGIC.items():
            if check(data):
                return kind
        raise InputValidationError(f"content does not look like {declared} (or any supported container)")
    return declared


def _ffmpeg_binary(explicit: Optional[str] = None) -> Optional[str]:
    return explicit or shutil.which("ffmpeg")


def _convert_with_ffmpeg(data: bytes, suffix: str, target: AudioSpec, ffmpeg: str) -> bytes:
    with tempfile.TemporaryDirectory(prefix="audio-conv-") as tmp:
        src = Path(tmp) / f"in.{suffix}"
        dst = Path(tmp) / "out.wav"
        src.write_bytes(data)
        cmd = [
            ffmpeg, "-y", "-i", str(src),
            "-ar", str(target.sample_rate_hz), "-ac", str(target.channels),
            "-sample_fmt", "s16", str(dst),
        ]
        proc = subprocess.run(cmd, capture_output=True)
        if proc.returncode != 0:
            raise ConversionError(
                f"ffmpeg exited {proc.returncode}: {proc.stderr.decode(errors='replace')[-2000:]}"
            )
        return dst.read_bytes()


def _resample_wav(parsed: wav.WavData, target: AudioSpec) -> bytes:
    samples = parsed.samples.astype(np.float64)
    if parsed.channels != target.channels:
        if target.channels == 1:
            samples = samples.mean(axis=1, keepdims=True)
        else:
            samples = np.repeat(samples[:, :1], target.channels, axis=1)
    if parsed.sample_rate_hz != target.sample_rate_hz:
        from math import gcd

        g = gcd(target.sample_rate_hz, parsed.sample_rate_hz)
        samples = resample_poly(samples, target.sample_rate_hz // g, parsed.sample_rate_hz // g, axis=0)
    scale = 1.0
    if parsed.bits_per_sample == 32:
        scale = 1 / 65536  # 32-bit int PCM down to 16-bit range
    out = np.clip(samples * scale, -32768, 32767).astype(np.int16)
    return wav.write_wav(out, target.sample_rate_hz, 16)


def normalize_audio(
    data: bytes,
    declared_format: str,
    target: AudioSpec = AudioSpec(),
    ffmpeg_path: Optional[str] = None,
) -> bytes:
    """Convert any supported container to PCM WAV at the target spec.

    A WAV already matching the target passes through byte-stable (no
    re-encode). WebM/M4A require the external toolchain.
    """
    kind = sniff_format(data, declared_format)
    if kind == "wav":
        parsed = wav.parse_wav(data)
        if (
            parsed.sample_rate_hz == target.sample_rate_hz
            and parsed.channels == target.channels
            and parsed.bits_per_sample == target.bits_per_sample
        ):
            return data
        return _resample_wav(parsed, target)
    ffmpeg = _ffmpeg_binary(ffmpeg_path)
    if ffmpeg is None:
        raise ConversionError(
            f"converting {kind} requires the external media toolchain (ffmpeg), which was not found"
        )
    return _convert_with_ffmpeg(data, kind, target, ffmpeg)


def prepare_voice_profile(
    data: bytes,
    declared_format: str,
    store: SessionStore,
    target: AudioSpec = AudioSpec(),
    min_sample_ms: int = DEFAULT_MIN_SAMPLE_MS,
    ffmpeg_path: Optional[str] = None,
) -> VoiceProfile:
    """Normalize and persist a voice sample. A sub-minimum sample yields a
    profile with status=invalid and a user-facing message, not an exception."""
    normalized = normalize_audio(data, declared_format, target, ffmpeg_path)
    duration_ms = wav.measure_duration_ms(normalized)
    ref = store.put_blob(normalized, "wav")
    if duration_ms >= min_sample_ms:
        status, message = "ready", None
    else:
        status = "invalid"
        message = (
            f"Voice sample is {duration_ms / 1000:.1f}s; at least {min_sample_ms / 1000:.0f}s "
            "is needed for cloning. Please record a longer sample."
        )
    profile = VoiceProfile(
        id=new_id(),
        sample_ref=ref.content_hash,
        original_format=declared_format,
        sample_duration_ms=duration_ms,
        reference_text=REFERENCE_TEXT,
        status=status,
        message=message,
    )
    store.write_doc("voices", profile.id, profile.to_dict())
    return profile


def _decode_audio_payload(payload: dict, slide_index: int) -> bytes:
    b64 = payload.get("audio_b64")
    if not b64:
        raise SynthesisError(slide_index, "provider response carried no audio")
    try:
        return base64.b64decode(b64)
    except Exception as e:
        raise SynthesisError(slide_index, f"provider audio is not valid base64: {e}")


def synthesize_segment(
    segment: ScriptSegment,
    profile: VoiceProfile,
    providers: ProviderSet,
    store: SessionStore,
    target: AudioSpec = AudioSpec(),
) -> AudioSegment:
    """Synthesize one script segment; falls back to standard TTS when the
    clone chain is exhausted or the profile is not ready."""
    degraded = False
    payload = None
    if profile.status == "ready":
        from .store import BlobRef

        sample = store.get_blob(BlobRef(profile.sample_ref, "wav", 1, profile.sample_ref))
        request = {
            "task": "tts",
            "text": segment.text,
            "reference_audio_b64": base64.b64encode(sample).decode("ascii"),
            "reference_text": profile.reference_text,
        }
        try:
            outcome = providers["tts_clone"].invoke(request)
            payload = outcome.payload
            # a fallback member inside the clone chain still clones the voice
            degraded = False
        except ProviderChainError:
            payload = None
    if payload is None:
        # profile unusable or clone chain exhausted: standard TTS
        try:
            outcome = providers["tts_standard"].invoke({"task": "tts", "text": segment.text})
        except ProviderChainError as e:
            raise SynthesisError(segment.slide_index, str(e)) from e
        payload = outcome.payload
        degraded = True
    audio = _decode_audio_payload(payload, segment.slide_index)
    try:
        normalized = normalize_audio(audio, "wav", target)
    except (InputValidationError, wav.WavFormatError, ConversionError) as e:
        raise SynthesisError(segment.slide_index, f"provider audio unusable: {e}")
    duration_ms = wav.measure_duration_ms(normalized)
    if duration_ms <= 0:
        raise SynthesisError(segment.slide_index, "provider returned zero-length audio")
    ref = store.put_blob(normalized, "wav")
    return AudioSegment(
        slide_index=segment.slide_index,
        audio_ref=ref.content_hash,
        duration_ms=duration_ms,
        sample_rate_hz=target.sample_rate_hz,
        channels=target.channels,
        synthesis_mode="fallback_tts" if degraded else "cloned",
    )


def synthesize_batch(
    script: NarrationScript,
    profile: VoiceProfile,
    providers: ProviderSet,
    store: SessionStore,
    target: AudioSpec = AudioSpec(),
    parallelism: int = DEFAULT_BATCH_PARALLELISM,
    on_progress=None,
) -> list[AudioSegment]:
    """Synthesize all segments with bounded parallelism; results are ordered
    by slide index regardless of completion order."""
    results: dict[int, AudioSegment] = {}
    failures: dict[int, str] = {}

    def work(seg: ScriptSegment):
        try:
            results[seg.slide_index] = synthesize_segment(seg, profile, providers, store, target)
        except PresentCoachError as e:
            failures[seg.slide_index] = str(e)
        if on_progress:
            on_progress(len(results) + len(failures), len(script.segments))

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        list(pool.map(work, script.segments))
    ordered = [results[i] for i in sorted(results)]
    if failures:
        raise BatchSynthesisError(failures, partial=ordered)
    return ordered


measure_duration = wav.measure_duration_ms
