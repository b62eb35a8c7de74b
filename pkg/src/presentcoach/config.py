"""Service configuration: one JSON file plus environment-variable overrides.

Environment overrides: PRESENTCOACH_STORE_ROOT, PRESENTCOACH_FFMPEG, and per
capability PRESENTCOACH_<CAPABILITY>_ENDPOINT / _MODEL / _API_KEY (capability
upper-cased, e.g. PRESENTCOACH_TTS_CLONE_ENDPOINT).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import InputValidationError
from .metrics import DEFAULT_FILLER_LEXICON, PauseParams
from .providers import CAPABILITIES
from .voice import DEFAULT_MIN_SAMPLE_MS, AudioSpec
from .media import VideoSpec

DEFAULT_DECK_CAP_BYTES = 50 * 1024 * 1024
DEFAULT_AUDIO_CAP_BYTES = 100 * 1024 * 1024


def default_provider_config() -> dict:
    return {
        "capabilities": {
            cap: {"endpoint": "stub://default", "model_name": f"stub-{cap}"}
            for cap in CAPABILITIES
        }
    }


@dataclass
class AppConfig:
    store_root: str = "./data"
    providers: dict = field(default_factory=default_provider_config)
    ffmpeg_path: Optional[str] = None
    renderer_command: Optional[list[str]] = None  # None -> built-in test renderer
    min_render_width: int = 1920
    video: VideoSpec = field(default_factory=VideoSpec)
    slide_gap_ms: int = 0
    audio: AudioSpec = field(default_factory=AudioSpec)
    min_voice_sample_ms: int = DEFAULT_MIN_SAMPLE_MS
    deck_cap_bytes: int = DEFAULT_DECK_CAP_BYTES
    audio_cap_bytes: int = DEFAULT_AUDIO_CAP_BYTES
    pause_params: PauseParams = field(default_factory=PauseParams)
    filler_lexicon: tuple[str, ...] = DEFAULT_FILLER_LEXICON
    chat_budget_chars: int = 24_000
    max_script_regenerations: int = 2
    job_workers: int = 2
    synthesis_parallelism: int = 4

    @classmethod
    def from_dict(cls, d: dict) -> "AppConfig":
        cfg = cls()
        known = set(cfg.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise InputValidationError(f"unknown config field {key!r}")
        cfg.store_root = d.get("store_root", cfg.store_root)
        cfg.providers = d.get("providers", cfg.providers)
        cfg.ffmpeg_path = d.get("ffmpeg_path")
        cfg.renderer_command = d.get("renderer_command")
        cfg.min_render_width = d.get("min_render_width", cfg.min_render_width)
        if "video" in d:
            cfg.video = VideoSpec(**d["video"])
        cfg.slide_gap_ms = d.get("slide_gap_ms", 0)
        if "audio" in d:
            cfg.audio = AudioSpec(**d["audio"])
        cfg.min_voice_sample_ms = d.get("min_voice_sample_ms", cfg.min_voice_sample_ms)
        cfg.deck_cap_bytes = d.get("deck_cap_bytes", cfg.deck_cap_bytes)
        cfg.audio_cap_bytes = d.get("audio_cap_bytes", cfg.audio_cap_bytes)
        if "pause_params" in d:
            cfg.pause_params = PauseParams(**d["pause_params"])
        if "filler_lexicon" in d:
            cfg.filler_lexicon = tuple(d["filler_lexicon"])
        cfg.chat_budget_chars = d.get("chat_budget_chars", cfg.chat_budget_chars)
        cfg.max_script_regenerations = d.get("max_script_regenerations", cfg.max_script_regenerations)
        cfg.job_workers = d.get("job_workers", cfg.job_workers)
        cfg.synthesis_parallelism = d.get("synthesis_parallelism", cfg.synthesis_parallelism)
        return cfg

    @classmethod
    def load(cls, path: Optional[str | Path] = None, providers_path: Optional[str | Path] = None) -> "AppConfig":
        doc = {}
        if path:
            try:
                doc = json.loads(Path(path).read_text())
            except json.JSONDecodeError as e:
                raise InputValidationError(f"config file {path} is not valid JSON: {e}")
        cfg = cls.from_dict(doc)
        if providers_path:
            cfg.providers = json.loads(Path(providers_path).read_text())
        cfg.apply_env(os.environ)
        return cfg

    def apply_env(self, env) -> None:
        if env.get("PRESENTCOACH_STORE_ROOT"):
            self.store_root = env["PRESENTCOACH_STORE_ROOT"]
        if env.get("PRESENTCOACH_FFMPEG"):
            self.ffmpeg_path = env["PRESENTCOACH_FFMPEG"]
        for cap in CAPABILITIES:
            prefix = f"PRESENTCOACH_{cap.upper()}_"
            entry = self.providers.setdefault("capabilities", {}).get(cap)
            if entry is None:
                continue
            if env.get(prefix + "ENDPOINT"):
                entry["endpoint"] = env[prefix + "ENDPOINT"]
            if env.get(prefix + "MODEL"):
                entry["model_name"] = env[prefix + "MODEL"]
            if env.get(prefix + "API_KEY"):
                entry["api_key"] = env[prefix + "API_KEY"]
