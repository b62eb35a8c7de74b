"""External media toolchain abstraction.

The real implementation shells out to FFmpeg/ffprobe. When no FFmpeg binary is
available (CI, offline dev), an OpenCV-based test-mode toolchain produces real
MP4 containers with the correct timing so every pipeline contract stays
verifiable; its output carries no audio track.
"""

from __future__ import annotations

import io
import json
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import cv2
import numpy as np
from PIL import Image

from .errors import AssemblyError

from . import wav


@dataclass(frozen=True)
class VideoSpec:
    width: int = 1920
    height: int = 1080
    fps: int = 30


@dataclass(frozen=True)
class MediaInfo:
    duration_ms: int
    width: int
    height: int


class MediaToolchain(Protocol):
    def compose_still_video(self, image_png: Path, audio_wav: Path, out_mp4: Path, spec: VideoSpec) -> None: ...

    def concat(self, inputs: list[Path], out_mp4: Path) -> None: ...

    def probe(self, path: Path) -> MediaInfo: ...


def letterbox_frame(png_bytes: bytes, spec: VideoSpec) -> np.ndarray:
    """Scale to fit inside the output resolution preserving aspect ratio,
    centered on black. Returns a BGR frame."""
    with Image.open(io.BytesIO(png_bytes)) as img:
        img = img.convert("RGB")
        scale = min(spec.width / img.width, spec.height / img.height)
        new_w, new_h = max(1, round(img.width * scale)), max(1, round(img.height * scale))
        resized = img.resize((new_w, new_h), Image.LANCZOS)
        canvas = Image.new("RGB", (spec.width, spec.height), (0, 0, 0))
        canvas.paste(resized, ((spec.width - new_w) // 2, (spec.height - new_h) // 2))
    return cv2.cvtColor(np.asarray(canvas), cv2.COLOR_RGB2BGR)


class FfmpegToolchain:
    """Compose via still-image looping with AAC audio; lossless concat over
    uniformly encoded segments; probing via ffprobe."""

    def __init__(self, ffmpeg: str = "ffmpeg", ffprobe: str = "ffprobe"):
        self.ffmpeg = ffmpeg
        self.ffprobe = ffprobe

    def _run(self, cmd: list[str]) -> subprocess.CompletedProcess:
        proc = subprocess.run(cmd, capture_output=True)
        if proc.returncode != 0:
            raise AssemblyError(
                f"{cmd[0]} exited {proc.returncode}: {proc.stderr.decode(errors='replace')[-2000:]}"
            )
        return proc

    def compose_still_video(self, image_png: Path, audio_wav: Path, out_mp4: Path, spec: VideoSpec) -> None:
        vf = (
            f"scale={spec.width}:{spec.height}:force_original_aspect_ratio=decrease,"
            f"pad={spec.width}:{spec.height}:(ow-iw)/2:(oh-ih)/2,format=yuv420p"
        )
        self._run(
            [
                self.ffmpeg, "-y",
                "-loop", "1", "-i", str(image_png),
                "-i", str(audio_wav),
                "-vf", vf,
                "-r", str(spec.fps),
                "-c:v", "libx264", "-tune", "stillimage", "-preset", "veryfast",
                "-c:a", "aac", "-b:a", "128k",
                "-shortest",
                str(out_mp4),
            ]
        )

    def concat(self, inputs: list[Path], out_mp4: Path) -> None:
        list_file = out_mp4.with_suffix(".concat.txt")
        list_file.write_text("".join(f"file '{p}'\n" for p in inputs))
        try:
            self._run(
                [self.ffmpeg, "-y", "-f", "concat", "-safe", "0", "-i", str(list_file), "-c", "copy", str(out_mp4)]
            )
        finally:
            list_file.unlink(missing_ok=True)

    def probe(self, path: Path) -> MediaInfo:
        proc = self._run(
            [
                self.ffprobe, "-v", "error",
                "-show_entries", "format=duration",
                "-show_entries", "stream=width,height,codec_type",
                "-of", "json", str(path),
            ]
        )
        doc = json.loads(proc.stdout)
        duration_ms = round(float(doc["format"]["duration"]) * 1000)
        width = height = 0
        for stream in doc.get("streams", []):
            if stream.get("codec_type") == "video" or stream.get("width"):
                width = stream.get("width", 0)
                height = stream.get("height", 0)
                break
        return MediaInfo(duration_ms=duration_ms, width=width, height=height)


class OpenCvToolchain:
    """Test-mode toolchain: video-only MP4s written frame by frame. Segment
    frame counts are derived from the audio duration so timing contracts hold."""

    def compose_still_video(self, image_png: Path, audio_wav: Path, out_mp4: Path, spec: VideoSpec) -> None:
        duration_ms = wav.measure_duration_ms(audio_wav.read_bytes())
        frames = round(duration_ms * spec.fps / 1000)
        if frames <= 0:
            raise AssemblyError("audio duration too short to produce any video frame")
        frame = letterbox_frame(image_png.read_bytes(), spec)
        writer = cv2.VideoWriter(
            str(out_mp4), cv2.VideoWriter_fourcc(*"mp4v"), spec.fps, (spec.width, spec.height)
        )
        if not writer.isOpened():
            raise AssemblyError("OpenCV VideoWriter failed to open output")
        try:
            for _ in range(frames):
                writer.write(frame)
        finally:
            writer.release()

    def concat(self, inputs: list[Path], out_mp4: Path) -> None:
        writer = None
        try:
            for path in inputs:
                cap = cv2.VideoCapture(str(path))
                if not cap.isOpened():
                    raise AssemblyError(f"cannot open segment {path}")
                fps = cap.get(cv2.CAP_PROP_FPS) or 30
                size = (
                    int(cap.get(cv2.CAP_PROP_FRAME_WIDTH)),
                    int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT)),
                )
                if writer is None:
                    writer = cv2.VideoWriter(str(out_mp4), cv2.VideoWriter_fourcc(*"mp4v"), fps, size)
                    if not writer.isOpened():
                        raise AssemblyError("OpenCV VideoWriter failed to open output")
                while True:
                    ok, frame = cap.read()
                    if not ok:
                        break
                    writer.write(frame)
                cap.release()
        finally:
            if writer is not None:
                writer.release()

    def probe(self, path: Path) -> MediaInfo:
        cap = cv2.VideoCapture(str(path))
        if not cap.isOpened():
            raise AssemblyError(f"cannot probe {path}")
        try:
            fps = cap.get(cv2.CAP_PROP_FPS) or 30
            frames = cap.get(cv2.CAP_PROP_FRAME_COUNT)
            return MediaInfo(
                duration_ms=round(frames / fps * 1000),
                width=int(cap.get(cv2.CAP_PROP_FRAME_WIDTH)),
                height=int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT)),
            )
        finally:
            cap.release()


def default_toolchain(ffmpeg_path: Optional[str] = None) -> MediaToolchain:
    ffmpeg = ffmpeg_path or shutil.which("ffmpeg")
    ffprobe = shutil.which("ffprobe") if ffmpeg_path is None else str(Path(ffmpeg_path).parent / "ffprobe")
    if ffmpeg and ffprobe:
        return FfmpegToolchain(ffmpeg, ffprobe)
    return OpenCvToolchain()
