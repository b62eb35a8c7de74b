"""Deterministic delivery analytics: silence-based pause detection over frame
RMS energy, plus pace/filler/pause metrics computed from a word-timed
transcript. These numbers ground the model-based analysis and are fully
reproducible."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import wav
from .errors import InputValidationError

DEFAULT_FILLER_LEXICON = ("um", "uh", "er", "ah", "like", "you know", "sort of", "kind of")


@dataclass(frozen=True)
class PauseParams:
    frame_ms: int = 25
    hop_ms: int = 10
    silence_threshold_dbfs: float = -35.0
    min_pause_ms: int = 300


@dataclass(frozen=True)
class Pause:
    start_ms: int
    end_ms: int

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass
class TranscriptWord:
    text: str
    start_ms: int
    end_ms: int
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranscriptWord":
        return cls(d["text"], d["start_ms"], d["end_ms"], d.get("confidence", 1.0))


@dataclass
class Transcript:
    words: list[TranscriptWord] = field(default_factory=list)

    def __post_init__(self):
        for prev, cur in zip(self.words, self.words[1:]):
            if cur.start_ms < prev.start_ms:
                raise InputValidationError("transcript word intervals must be non-decreasing")

    @property
    def full_text(self) -> str:
        return " ".join(w.text for w in self.words)

    def to_dict(self) -> dict:
        return {"words": [w.to_dict() for w in self.words], "full_text": self.full_text}

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        return cls([TranscriptWord.from_dict(w) for w in d.get("words", [])])


@dataclass
class DeliveryMetrics:
    word_count: int
    words_per_minute: float
    filler_count: int
    filler_rate: float  # fillers per 100 words
    pause_count: int
    total_pause_ms: int
    longest_pause_ms: int
    speech_ms: int
    duration_ms: int
    duration_ratio: Optional[float] = None  # user duration / ideal duration

    def to_dict(self) -> dict:
        return {
            "word_count": self.word_count,
            "words_per_minute": self.words_per_minute,
            "filler_count": self.filler_count,
            "filler_rate": self.filler_rate,
            "pause_count": self.pause_count,
            "total_pause_ms": self.total_pause_ms,
            "longest_pause_ms": self.longest_pause_ms,
            "speech_ms": self.speech_ms,
            "duration_ms": self.duration_ms,
            "duration_ratio": self.duration_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeliveryMetrics":
        return cls(
            d["word_count"], d["words_per_minute"], d["filler_count"], d["filler_rate"],
            d["pause_count"], d["total_pause_ms"], d["longest_pause_ms"], d["speech_ms"],
            d["duration_ms"], d.get("duration_ratio"),
        )


def frame_rms_dbfs(samples: np.ndarray, sample_rate_hz: int, params: PauseParams) -> np.ndarray:
    """RMS level in dBFS for each analysis frame (hop-spaced, frame-sized)."""
    mono = samples.astype(np.float64)
    if mono.ndim == 2:
        mono = mono.mean(axis=1)
    mono /= 32768.0
    frame = round(params.frame_ms * sample_rate_hz / 1000)
    hop = round(params.hop_ms * sample_rate_hz / 1000)
    n_frames = max(0, (len(mono) - frame) // hop + 1) if len(mono) >= frame else 0
    levels = np.empty(n_frames)
    for i in range(n_frames):
        chunk = mono[i * hop : i * hop + frame]
        rms = math.sqrt(float(np.mean(chunk * chunk)))
        levels[i] = 20 * math.log10(rms) if rms > 0 else -math.inf
    return levels


def detect_pauses(wav_bytes: bytes, params: PauseParams = PauseParams()) -> list[Pause]:
    """Runs of sub-threshold frames lasting at least min_pause_ms. Leading and
    trailing silence count as pauses."""
    parsed = wav.parse_wav(wav_bytes)
    levels = frame_rms_dbfs(parsed.samples, parsed.sample_rate_hz, params)
    silent = levels < params.silence_threshold_dbfs
    pauses = []
    run_start = None
    for i, is_silent in enumerate(silent):
        if is_silent and run_start is None:
            run_start = i
        elif not is_silent and run_start is not None:
            start_ms = run_start * params.hop_ms
            end_ms = (i - 1) * params.hop_ms + params.frame_ms
            if end_ms - start_ms >= params.min_pause_ms:
                pauses.append(Pause(start_ms, end_ms))
            run_start = None
    if run_start is not None:
        start_ms = run_start * params.hop_ms
        end_ms = parsed.duration_ms  # trailing silence runs to the end of audio
        if end_ms - start_ms >= params.min_pause_ms:
            pauses.append(Pause(start_ms, end_ms))
    return pauses


def count_fillers(tokens: list[str], lexicon: tuple[str, ...] = DEFAULT_FILLER_LEXICON) -> int:
    """Case-insensitive whole-token matching; multiword fillers match adjacent
    tokens, greedily and without overlap (longest filler first at each spot)."""
    lowered = [t.lower() for t in tokens]
    phrases = sorted((tuple(f.lower().split()) for f in lexicon), key=len, reverse=True)
    count = 0
    i = 0
    while i < len(lowered):
        for phrase in phrases:
            if tuple(lowered[i : i + len(phrase)]) == phrase:
                count += 1
                i += len(phrase)
                break
        else:
            i += 1
    return count


def compute_delivery_metrics(
    transcript: Transcript,
    wav_bytes: bytes,
    filler_lexicon: tuple[str, ...] = DEFAULT_FILLER_LEXICON,
    ideal_duration_ms: Optional[int] = None,
    pause_params: PauseParams = PauseParams(),
) -> DeliveryMetrics:
    duration_ms = wav.measure_duration_ms(wav_bytes)
    if duration_ms <= 0:
        raise InputValidationError("cannot compute metrics over zero-duration audio")
    tokens = [w.text for w in transcript.words]
    word_count = len(tokens)
    wpm = word_count / (duration_ms / 60000)
    filler_count = count_fillers(tokens, filler_lexicon)
    filler_rate = (filler_count / word_count * 100) if word_count else 0.0
    pauses = detect_pauses(wav_bytes, pause_params)
    total_pause = sum(p.duration_ms for p in pauses)
    return DeliveryMetrics(
        word_count=word_count,
        words_per_minute=wpm,
        filler_count=filler_count,
        filler_rate=filler_rate,
        pause_count=len(pauses),
        total_pause_ms=total_pause,
        longest_pause_ms=max((p.duration_ms for p in pauses), default=0),
        speech_ms=duration_ms - total_pause,
        duration_ms=duration_ms,
        duration_ratio=(duration_ms / ideal_duration_ms) if ideal_duration_ms else None,
    )
