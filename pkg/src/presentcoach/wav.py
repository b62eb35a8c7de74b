"""Native PCM WAV reading/writing (RIFF/fmt/data chunks, integer PCM only)."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


class WavFormatError(ValueError):
    """Raised when bytes are not a parseable PCM WAV file."""


@dataclass
class WavData:
    sample_rate_hz: int
    channels: int
    bits_per_sample: int
    samples: np.ndarray  # shape (frames, channels), int16/int32 depending on depth

    @property
    def frame_count(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_ms(self) -> int:
        # round-half-up on the exact rational, so 1 frame @ 44.1 kHz -> 0 ms
        return int((self.frame_count * 1000 + self.sample_rate_hz // 2) // self.sample_rate_hz)


_PCM_DTYPES = {16: np.dtype("<i2"), 32: np.dtype("<i4")}


def parse_wav(data: bytes) -> WavData:
    """Parse a PCM WAV file. Only uncompressed integer PCM is supported."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or payload is None:
        raise WavFormatError("missing fmt or data chunk")
    audio_format, channels, rate, _byte_rate, block_align, bits = fmt
    if audio_format != 1:
        raise WavFormatError(f"unsupported audio format code {audio_format} (PCM only)")
    if bits not in _PCM_DTYPES:
        raise WavFormatError(f"unsupported bit depth {bits}")
    if channels < 1 or rate < 1 or block_align != channels * bits // 8:
        raise WavFormatError("inconsistent fmt chunk")
    usable = len(payload) - len(payload) % block_align
    samples = np.frombuffer(payload[:usable], dtype=_PCM_DTYPES[bits]).reshape(-1, channels)
    return WavData(sample_rate_hz=rate, channels=channels, bits_per_sample=bits, samples=samples)


def write_wav(samples: np.ndarray, sample_rate_hz: int, bits_per_sample: int = 16) -> bytes:
    """Serialize int samples (frames, channels) or (frames,) to PCM WAV bytes."""
    if samples.ndim == 1:
        samples = samples[:, None]
    dtype = _PCM_DTYPES[bits_per_sample]
    raw = np.ascontiguousarray(samples.astype(dtype)).tobytes()
    channels = samples.shape[1]
    block_align = channels * bits_per_sample // 8
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(raw)),
            b"WAVE",
            b"fmt ",
            struct.pack(
                "<IHHIIHH",
                16,
                1,
                channels,
                sample_rate_hz,
                sample_rate_hz * block_align,
                block_align,
                bits_per_sample,
            ),
            b"data",
            struct.pack("<I", len(raw)),
        ]
    )
    return header + raw


def measure_duration_ms(wav_bytes: bytes) -> int:
    """Duration from PCM frame count, rounded to the nearest millisecond."""
    return parse_wav(wav_bytes).duration_ms


def silence(duration_ms: int, sample_rate_hz: int = 16000) -> bytes:
    frames = round(duration_ms * sample_rate_hz / 1000)
    return write_wav(np.zeros(frames, dtype=np.int16), sample_rate_hz)


def sine_tone(
    duration_ms: int,
    sample_rate_hz: int = 16000,
    freq_hz: float = 440.0,
    amplitude: float = 0.5,
) -> bytes:
    frames = round(duration_ms * sample_rate_hz / 1000)
    t = np.arange(frames) / sample_rate_hz
    wave = (amplitude * 32767 * np.sin(2 * np.pi * freq_hz * t)).astype(np.int16)
    return write_wav(wave, sample_rate_hz)
