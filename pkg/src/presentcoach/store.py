"""File-backed session store: one JSON document per session plus a
content-addressed blob directory. Writes are atomic (temp file + rename) and
serialized per session; reads see the latest committed write."""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import tempfile
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

from .errors import (
    InputValidationError,
    IntegrityError,
    NotFoundError,
    PersistenceError,
    PreconditionError,
    StateError,
)

SCHEMA_VERSION = 1

MEDIA_KINDS = {"pptx", "png", "wav", "webm", "m4a", "mp4", "json"}


class Stage(str, Enum):
    SETUP = "setup"
    GENERATING = "generating"
    COACHING = "coaching"


LEGAL_TRANSITIONS = {
    (Stage.SETUP, Stage.GENERATING),
    (Stage.GENERATING, Stage.COACHING),
    (Stage.GENERATING, Stage.SETUP),  # pipeline failure reverts to setup
}


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _parse_ts(raw: str) -> datetime:
    return datetime.fromisoformat(raw)


@dataclass(frozen=True)
class BlobRef:
    id: str
    media_kind: str
    byte_length: int
    content_hash: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "media_kind": self.media_kind,
            "byte_length": self.byte_length,
            "content_hash": self.content_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlobRef":
        return cls(d["id"], d["media_kind"], d["byte_length"], d["content_hash"])


@dataclass
class ChatMessage:
    role: str  # "user" | "coach"
    content: str
    timestamp: datetime
    linked_analysis: Optional[str] = None
    delivery_failed: bool = False

    def __post_init__(self):
        if self.role not in ("user", "coach"):
            raise InputValidationError(f"unknown chat role {self.role!r}")
        if not self.content:
            raise InputValidationError("chat message content must be nonempty")

    def to_dict(self) -> dict:
        d = {"role": self.role, "content": self.content, "timestamp": _iso(self.timestamp)}
        if self.linked_analysis:
            d["linked_analysis"] = self.linked_analysis
        if self.delivery_failed:
            d["delivery_failed"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChatMessage":
        return cls(
            role=d["role"],
            content=d["content"],
            timestamp=_parse_ts(d["timestamp"]),
            linked_analysis=d.get("linked_analysis"),
            delivery_failed=d.get("delivery_failed", False),
        )


@dataclass
class Session:
    id: str
    created_at: datetime
    stage: Stage
    user_prompt: str = ""
    deck_ref: Optional[str] = None
    voice_profile_ref: Optional[str] = None
    exemplar_ref: Optional[str] = None
    practice_refs: list[str] = field(default_factory=list)
    analysis_refs: list[str] = field(default_factory=list)
    chat_history: list[ChatMessage] = field(default_factory=list)
    deleted: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "created_at": _iso(self.created_at),
            "stage": self.stage.value,
            "user_prompt": self.user_prompt,
            "deck_ref": self.deck_ref,
            "voice_profile_ref": self.voice_profile_ref,
            "exemplar_ref": self.exemplar_ref,
            "practice_refs": list(self.practice_refs),
            "analysis_refs": list(self.analysis_refs),
            "chat_history": [m.to_dict() for m in self.chat_history],
            "deleted": self.deleted,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Session":
        return cls(
            id=d["id"],
            created_at=_parse_ts(d["created_at"]),
            stage=Stage(d["stage"]),
            user_prompt=d.get("user_prompt", ""),
            deck_ref=d.get("deck_ref"),
            voice_profile_ref=d.get("voice_profile_ref"),
            exemplar_ref=d.get("exemplar_ref"),
            practice_refs=list(d.get("practice_refs", [])),
            analysis_refs=list(d.get("analysis_refs", [])),
            chat_history=[ChatMessage.from_dict(m) for m in d.get("chat_history", [])],
            deleted=d.get("deleted", False),
        )


@dataclass(frozen=True)
class SessionSummary:
    id: str
    created_at: datetime
    stage: Stage
    user_prompt: str


def new_id() -> str:
    # 128-bit random hex, collision-free without coordination
    return secrets.token_hex(16)


class _LockRegistry:
    def __init__(self):
        self._locks: dict[str, threading.RLock] = {}
        self._guard = threading.Lock()

    def get(self, key: str) -> threading.RLock:
        with self._guard:
            lock = self._locks.get(key)
            if lock is None:
                lock = self._locks[key] = threading.RLock()
            return lock


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise PersistenceError(f"failed writing {path}: {e}") from e


def atomic_write_json(path: Path, doc: dict) -> None:
    atomic_write_bytes(path, json.dumps(doc, indent=2).encode("utf-8"))


class SessionStore:
    """Persistent root for sessions, blobs and auxiliary documents
    (practice recordings, analysis reports, pipeline jobs)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("sessions", "blobs", "practices", "reports", "jobs", "decks", "voices", "exemplars", "scripts"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._locks = _LockRegistry()

    # ---- blobs ------------------------------------------------------------

    def put_blob(self, data: bytes, media_kind: str) -> BlobRef:
        if media_kind not in MEDIA_KINDS:
            raise InputValidationError(f"unknown media kind {media_kind!r}")
        if not data:
            raise InputValidationError("empty blob")
        digest = hashlib.sha256(data).hexdigest()
        path = self.root / "blobs" / digest
        if not path.exists():
            atomic_write_bytes(path, data)
        return BlobRef(id=digest, media_kind=media_kind, byte_length=len(data), content_hash=digest)

    def get_blob(self, ref: BlobRef) -> bytes:
        path = self.root / "blobs" / ref.content_hash
        if not path.exists():
            raise NotFoundError(f"blob {ref.content_hash} not found")
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != ref.content_hash:
            raise IntegrityError(f"blob {ref.content_hash} failed hash verification")
        return data

    def get_blob_by_hash(self, content_hash: str) -> bytes:
        return self.get_blob(BlobRef(content_hash, "", 0, content_hash))

    def blob_path(self, ref: BlobRef) -> Path:
        return self.root / "blobs" / ref.content_hash

    # ---- sessions ---------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.json"

    def _save(self, session: Session) -> None:
        atomic_write_json(self._session_path(session.id), session.to_dict())

    def create_session(self, user_prompt: str = "") -> Session:
        session = Session(id=new_id(), created_at=utcnow(), stage=Stage.SETUP, user_prompt=user_prompt)
        with self._locks.get(session.id):
            self._save(session)
        return session

    def load_session(self, session_id: str) -> Session:
        path = self._session_path(session_id)
        if not path.exists():
            raise NotFoundError(f"session {session_id} not found")
        try:
            return Session.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise PersistenceError(f"session {session_id} is corrupt: {e}") from e

    def list_sessions(self, include_deleted: bool = False) -> list[SessionSummary]:
        out = []
        for path in (self.root / "sessions").glob("*.json"):
            s = self.load_session(path.stem)
            if s.deleted and not include_deleted:
                continue
            out.append(SessionSummary(s.id, s.created_at, s.stage, s.user_prompt))
        out.sort(key=lambda s: (s.created_at, s.id))
        return out

    def update_session(self, session_id: str, mutate: Callable[[Session], Session]) -> Session:
        """Apply a mutation under the per-session write lock and persist."""
        with self._locks.get(session_id):
            session = self.load_session(session_id)
            updated = mutate(session)
            self._save(updated)
            return updated

    # ---- lifecycle operations --------------------------------------------

    def transition_stage(self, session_id: str, target: Stage) -> Session:
        def mutate(s: Session) -> Session:
            if (s.stage, target) not in LEGAL_TRANSITIONS:
                raise StateError(f"illegal transition {s.stage.value} -> {target.value}")
            if target is Stage.GENERATING and not (s.deck_ref and s.voice_profile_ref):
                raise PreconditionError("stage=generating requires a deck and a voice profile")
            if target is Stage.COACHING and not s.exemplar_ref:
                raise PreconditionError("stage=coaching requires an exemplar")
            return replace(s, stage=target)

        return self.update_session(session_id, mutate)

    def attach_artifact(self, session_id: str, kind: str, ref_id: str) -> Session:
        """kind: deck | voice | exemplar | practice. Deck/voice attach only in
        setup, practice only in coaching; exemplar is set by the pipeline while
        generating."""

        def mutate(s: Session) -> Session:
            if kind in ("deck", "voice"):
                if s.stage is not Stage.SETUP:
                    raise StateError(f"cannot attach {kind} in stage {s.stage.value}")
                if kind == "deck":
                    return replace(s, deck_ref=ref_id)
                return replace(s, voice_profile_ref=ref_id)
            if kind == "exemplar":
                if s.stage is not Stage.GENERATING:
                    raise StateError(f"cannot attach exemplar in stage {s.stage.value}")
                return replace(s, exemplar_ref=ref_id)
            if kind == "practice":
                if s.stage is not Stage.COACHING:
                    raise StateError(f"cannot attach practice in stage {s.stage.value}")
                return replace(s, practice_refs=s.practice_refs + [ref_id])
            raise InputValidationError(f"unknown artifact kind {kind!r}")

        return self.update_session(session_id, mutate)

    def attach_analysis(self, session_id: str, analysis_id: str, practice_id: str) -> Session:
        def mutate(s: Session) -> Session:
            if s.stage is not Stage.COACHING:
                raise StateError(f"cannot attach analysis in stage {s.stage.value}")
            if practice_id not in s.practice_refs:
                raise PreconditionError("analysis must reference an attached practice recording")
            return replace(s, analysis_refs=s.analysis_refs + [analysis_id])

        return self.update_session(session_id, mutate)

    def append_chat(self, session_id: str, messages: Iterable[ChatMessage]) -> Session:
        messages = list(messages)

        def mutate(s: Session) -> Session:
            history = list(s.chat_history)
            last_ts = history[-1].timestamp if history else None
            for m in messages:
                if last_ts is not None and m.timestamp < last_ts:
                    raise InputValidationError("chat timestamps must be non-decreasing")
                history.append(m)
                last_ts = m.timestamp
            return replace(s, chat_history=history)

        return self.update_session(session_id, mutate)

    def set_user_prompt(self, session_id: str, prompt: str) -> Session:
        return self.update_session(session_id, lambda s: replace(s, user_prompt=prompt))

    def soft_delete(self, session_id: str) -> Session:
        return self.update_session(session_id, lambda s: replace(s, deleted=True))

    # ---- auxiliary documents ---------------------------------------------

    def doc_path(self, kind: str, doc_id: str) -> Path:
        return self.root / kind / f"{doc_id}.json"

    def write_doc(self, kind: str, doc_id: str, doc: dict) -> None:
        atomic_write_json(self.doc_path(kind, doc_id), doc)

    def read_doc(self, kind: str, doc_id: str) -> dict:
        path = self.doc_path(kind, doc_id)
        if not path.exists():
            raise NotFoundError(f"{kind[:-1] if kind.endswith('s') else kind} {doc_id} not found")
        return json.loads(path.read_text())

    def list_doc_ids(self, kind: str) -> list[str]:
        return sorted(p.stem for p in (self.root / kind).glob("*.json"))

    # ---- maintenance ------------------------------------------------------

    def gc_blobs(self) -> list[str]:
        """Delete blobs unreferenced by any live document. Explicit maintenance
        command, never run automatically."""
        referenced: set[str] = set()

        def scan(obj):
            if isinstance(obj, dict):
                for v in obj.values():
                    scan(v)
            elif isinstance(obj, list):
                for v in obj:
                    scan(v)
            elif isinstance(obj, str) and len(obj) == 64:
                referenced.add(obj)

        for kind in ("sessions", "practices", "reports", "jobs", "decks", "voices", "exemplars", "scripts"):
            for doc_id in self.list_doc_ids(kind):
                scan(self.read_doc(kind, doc_id))
        removed = []
        for blob in (self.root / "blobs").iterdir():
            if blob.name not in referenced:
                blob.unlink()
                removed.append(blob.name)
        return removed
