"""Slide deck ingestion: validate .pptx uploads, extract per-slide text and
notes from the OOXML package, and render slides to PNG through a pluggable
external renderer."""

from __future__ import annotations

import io
import posixpath
import shutil
import subprocess
import tempfile
import zipfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol
from xml.etree import ElementTree

from PIL import Image

from .errors import (
    InputValidationError,
    IntegrityError,
    PreconditionError,
    RendererError,
    ResolutionError,
)

NS = {
    "p": "http://schemas.openxmlformats.org/presentationml/2006/main",
    "a": "http://schemas.openxmlformats.org/drawingml/2006/main",
    "r": "http://schemas.openxmlformats.org/officeDocument/2006/relationships",
    "rel": "http://schemas.openxmlformats.org/package/2006/relationships",
}

# errors the zip layer can raise on a corrupted member (bad CRC, unknown
# compression method, truncated stream, encrypted entry)
_ZIP_READ_ERRORS = (
    KeyError,
    ElementTree.ParseError,
    zipfile.BadZipFile,
    zlib.error,
    NotImplementedError,
    EOFError,
    OSError,
    RuntimeError,
)

DEFAULT_MAX_DECK_BYTES = 50 * 1024 * 1024
DEFAULT_MIN_RENDER_WIDTH = 1920


class DeckValidationError(InputValidationError):
    """Deck upload rejected; `reason` is a stable machine-readable code."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass
class Slide:
    index: int  # 1-based
    title: Optional[str] = None
    body_texts: list[str] = field(default_factory=list)
    notes: Optional[str] = None
    image_ref: Optional[str] = None
    image_width: Optional[int] = None
    image_height: Optional[int] = None
    parse_error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "title": self.title,
            "body_texts": list(self.body_texts),
            "notes": self.notes,
            "image_ref": self.image_ref,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "parse_error": self.parse_error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Slide":
        return cls(
            index=d["index"],
            title=d.get("title"),
            body_texts=list(d.get("body_texts", [])),
            notes=d.get("notes"),
            image_ref=d.get("image_ref"),
            image_width=d.get("image_width"),
            image_height=d.get("image_height"),
            parse_error=d.get("parse_error"),
        )


@dataclass
class SlideDeck:
    id: str
    source_ref: str
    slide_count: int
    slides: list[Slide]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source_ref": self.source_ref,
            "slide_count": self.slide_count,
            "slides": [s.to_dict() for s in self.slides],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SlideDeck":
        return cls(d["id"], d["source_ref"], d["slide_count"], [Slide.from_dict(s) for s in d["slides"]])


@dataclass(frozen=True)
class DeckInfo:
    slide_count: int
    total_bytes: int


def _slide_paths_in_order(zf: zipfile.ZipFile) -> list[str]:
    """Slide part paths ordered by the presentation's slide-id list, resolved
    through the relationships part (physical file names do not define order)."""
    pres = ElementTree.fromstring(zf.read("ppt/presentation.xml"))
    rels = ElementTree.fromstring(zf.read("ppt/_rels/presentation.xml.rels"))
    rel_targets = {
        rel.get("Id"): rel.get("Target")
        for rel in rels.findall("rel:Relationship", NS)
    }
    paths = []
    for sld_id in pres.findall("p:sldIdLst/p:sldId", NS):
        rid = sld_id.get(f"{{{NS['r']}}}id")
        target = rel_targets.get(rid)
        if target is None:
            raise DeckValidationError("missing-part", f"slide relationship {rid} unresolved")
        paths.append(posixpath.normpath(posixpath.join("ppt", target)))
    return paths


def validate_deck(data: bytes, max_bytes: int = DEFAULT_MAX_DECK_BYTES) -> DeckInfo:
    if len(data) > max_bytes:
        raise DeckValidationError("oversize", f"deck is {len(data)} bytes, cap is {max_bytes}")
    if data[:4] == b"\xd0\xcf\x11\xe0":
        raise DeckValidationError(
            "legacy-ppt", "legacy .ppt format is not supported; save as .pptx and re-upload"
        )
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile:
        raise DeckValidationError("not-a-zip", "upload is not a ZIP archive (.pptx required)")
    names = set(zf.namelist())
    if "ppt/presentation.xml" not in names:
        raise DeckValidationError("missing-part", "archive has no ppt/presentation.xml (not a .pptx)")
    try:
        slide_paths = _slide_paths_in_order(zf)
    except _ZIP_READ_ERRORS as e:
        raise DeckValidationError("missing-part", f"presentation parts unreadable: {e}")
    if not slide_paths:
        raise DeckValidationError("zero-slides", "presentation contains no slides")
    return DeckInfo(slide_count=len(slide_paths), total_bytes=len(data))


def _shape_text(sp: ElementTree.Element) -> tuple[Optional[str], str]:
    """(placeholder_type, concatenated text) for one shape."""
    ph = sp.find("p:nvSpPr/p:nvPr/p:ph", NS)
    ph_type = ph.get("type") if ph is not None else None
    runs = [t.text or "" for t in sp.findall("p:txBody//a:t", NS)]
    return ph_type, "".join(runs)


def _notes_text(zf: zipfile.ZipFile, slide_path: str) -> Optional[str]:
    rels_path = posixpath.join(posixpath.dirname(slide_path), "_rels", posixpath.basename(slide_path) + ".rels")
    try:
        rels = ElementTree.fromstring(zf.read(rels_path))
    except _ZIP_READ_ERRORS:
        return None
    for rel in rels.findall("rel:Relationship", NS):
        if rel.get("Type", "").endswith("/notesSlide"):
            notes_path = posixpath.normpath(
                posixpath.join(posixpath.dirname(slide_path), rel.get("Target"))
            )
            try:
                notes = ElementTree.fromstring(zf.read(notes_path))
            except _ZIP_READ_ERRORS:
                return None
            texts = [t.text or "" for t in notes.findall(".//a:t", NS)]
            joined = "\n".join(t for t in texts if t).strip()
            return joined or None
    return None


def extract_slides(data: bytes) -> list[Slide]:
    """Text metadata per slide, in presentation order. A malformed slide XML
    yields a Slide carrying parse_error instead of aborting the deck."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
        slide_paths = _slide_paths_in_order(zf)
    except _ZIP_READ_ERRORS as e:
        raise DeckValidationError("missing-part", f"presentation parts unreadable: {e}")
    slides = []
    for i, path in enumerate(slide_paths, start=1):
        slide = Slide(index=i)
        try:
            root = ElementTree.fromstring(zf.read(path))
            for sp in root.findall("p:cSld/p:spTree/p:sp", NS):
                ph_type, text = _shape_text(sp)
                if not text:
                    continue
                if ph_type in ("title", "ctrTitle") and slide.title is None:
                    slide.title = text
                else:
                    slide.body_texts.append(text)
            slide.notes = _notes_text(zf, path)
        except _ZIP_READ_ERRORS as e:
            slide.parse_error = str(e)
        slides.append(slide)
    return slides


class ExternalRenderer(Protocol):
    """Filesystem contract: read the deck file, write slide-<n>.png (1-based)
    into out_dir, one per slide."""

    def render(self, deck_path: Path, out_dir: Path) -> None: ...


class SubprocessRenderer:
    """Runs a converter command; `{input}` and `{outdir}` placeholders are
    substituted. Any converter honoring the slide-<n>.png naming plugs in."""

    def __init__(self, command: list[str], timeout_s: float = 300.0):
        self.command = command
        self.timeout_s = timeout_s


    def render(self, deck_path: Path, out_dir: Path) -> None:
        cmd = [arg.format(input=str(deck_path), outdir=str(out_dir)) for arg in self.command]
        proc = subprocess.run(cmd, capture_output=True, timeout=self.timeout_s)
        if proc.returncode != 0:
            raise RendererError(
                f"renderer exited {proc.returncode}: {proc.stderr.decode(errors='replace')[-2000:]}"
            )


class TestRenderer:
    """Deterministic renderer for offline runs: solid-color slides stamped
    with the slide index. Slide count is read from the deck itself."""

    __test__ = False  # keep pytest from collecting this as a test class

    def __init__(self, width: int = 1920, height: int = 1080):
        self.width = width
        self.height = height

    def render(self, deck_path: Path, out_dir: Path) -> None:
        data = deck_path.read_bytes()
        info = validate_deck(data)
        palette = [(31, 78, 121), (84, 130, 53), (132, 60, 12), (64, 64, 64), (112, 48, 160)]
        for i in range(1, info.slide_count + 1):
            img = Image.new("RGB", (self.width, self.height), palette[(i - 1) % len(palette)])
            # stamp a crude index marker: i white blocks along the top edge
            block = self.width // 40
            for b in range(i):
                img.paste((255, 255, 255), (b * 2 * block, 0, b * 2 * block + block, block))
            img.save(out_dir / f"slide-{i}.png")


def render_slides(
    data: bytes,
    renderer: ExternalRenderer,
    min_width: int = DEFAULT_MIN_RENDER_WIDTH,
    undersized_is_error: bool = True,
) -> list[bytes]:
    """Render every slide to PNG; returns PNG bytes ordered by slide index."""
    info = validate_deck(data)
    tmp = Path(tempfile.mkdtemp(prefix="deck-render-"))
    try:
        deck_path = tmp / "deck.pptx"
        deck_path.write_bytes(data)
        out_dir = tmp / "out"
        out_dir.mkdir()
        renderer.render(deck_path, out_dir)
        pngs = []
        for i in range(1, info.slide_count + 1):
            path = out_dir / f"slide-{i}.png"
            if not path.exists():
                produced = len(list(out_dir.glob("slide-*.png")))
                raise IntegrityError(
                    f"renderer produced {produced} files for {info.slide_count} slides"
                )
            png = path.read_bytes()
            try:
                with Image.open(io.BytesIO(png)) as img:
                    width = img.size[0]
                    img.verify()
            except Exception as e:
                raise IntegrityError(f"slide {i} PNG does not decode: {e}")
            if width < min_width:
                msg = f"slide {i} rendered {width}px wide, minimum is {min_width}"
                if undersized_is_error:
                    raise ResolutionError(msg)
            pngs.append(png)
        return pngs
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def png_size(png: bytes) -> tuple[int, int]:
    with Image.open(io.BytesIO(png)) as img:
        return img.size


def ingest_deck(data: bytes, renderer: ExternalRenderer, store, min_width: int = DEFAULT_MIN_RENDER_WIDTH) -> SlideDeck:
    """Full ingest: validate, extract text, render, persist blobs and the deck
    document. Raises DeckValidationError / RendererError on failure."""
    from .store import new_id

    validate_deck(data)
    slides = extract_slides(data)
    pngs = render_slides(data, renderer, min_width=min_width)
    if len(pngs) != len(slides):
        raise IntegrityError(f"extracted {len(slides)} slides but rendered {len(pngs)}")
    source_ref = store.put_blob(data, "pptx")
    for slide, png in zip(slides, pngs):
        ref = store.put_blob(png, "png")
        slide.image_ref = ref.content_hash
        slide.image_width, slide.image_height = png_size(png)
    deck = SlideDeck(id=new_id(), source_ref=source_ref.content_hash, slide_count=len(slides), slides=slides)
    store.write_doc("decks", deck.id, deck.to_dict())
    return deck
