"""Hand-built OOXML and audio fixtures used across the suite."""

from __future__ import annotations

import io
import zipfile

P_NS = "http://schemas.openxmlformats.org/presentationml/2006/main"
A_NS = "http://schemas.openxmlformats.org/drawingml/2006/main"
R_NS = "http://schemas.openxmlformats.org/officeDocument/2006/relationships"
REL_NS = "http://schemas.openxmlformats.org/package/2006/relationships"


def _slide_xml(title: str | None, bodies: list[str]) -> str:
    shapes = []
    if title is not None:
        shapes.append(
            f"""<p:sp><p:nvSpPr><p:nvPr><p:ph type="title"/></p:nvPr></p:nvSpPr>
            <p:txBody><a:p><a:r><a:t>{title}</a:t></a:r></a:p></p:txBody></p:sp>"""
        )
    for body in bodies:
        runs = "".join(f"<a:r><a:t>{part}</a:t></a:r>" for part in body.split("|"))
        shapes.append(
            f"""<p:sp><p:nvSpPr><p:nvPr/></p:nvSpPr>
            <p:txBody><a:p>{runs}</a:p></p:txBody></p:sp>"""
        )
    return f"""<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<p:sld xmlns:p="{P_NS}" xmlns:a="{A_NS}" xmlns:r="{R_NS}">
  <p:cSld><p:spTree>{''.join(shapes)}</p:spTree></p:cSld>
</p:sld>"""


def _notes_xml(text: str) -> str:
    return f"""<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<p:notes xmlns:p="{P_NS}" xmlns:a="{A_NS}">
  <p:cSld><p:spTree><p:sp><p:txBody><a:p><a:r><a:t>{text}</a:t></a:r></a:p></p:txBody></p:sp></p:spTree></p:cSld>
</p:notes>"""


def build_pptx(
    slides: list[dict],
    physical_order: list[int] | None = None,
    corrupt_slide: int | None = None,
) -> bytes:
    """slides: [{"title": ..., "bodies": [...], "notes": ...}]. Slide i (1-based)
    is stored as slides/slide<physical>.xml; the sldIdLst keeps logical order.
    `corrupt_slide` writes malformed XML for that logical slide."""
    n = len(slides)
    physical = physical_order or list(range(1, n + 1))
    assert sorted(physical) == list(range(1, n + 1))

    sld_ids = "".join(
        f'<p:sldId id="{255 + i}" r:id="rId{i}"/>' for i in range(1, n + 1)
    )
    presentation = f"""<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<p:presentation xmlns:p="{P_NS}" xmlns:r="{R_NS}">
  <p:sldIdLst>{sld_ids}</p:sldIdLst>
</p:presentation>"""

    rels = "".join(
        f'<Relationship Id="rId{i}" '
        f'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/slide" '
        f'Target="slides/slide{physical[i - 1]}.xml"/>'
        for i in range(1, n + 1)
    )
    presentation_rels = f"""<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Relationships xmlns="{REL_NS}">{rels}</Relationships>"""

    content_types = """<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">
  <Default Extension="xml" ContentType="application/xml"/>
  <Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>
</Types>"""

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("[Content_Types].xml", content_types)
        zf.writestr("ppt/presentation.xml", presentation)
        zf.writestr("ppt/_rels/presentation.xml.rels", presentation_rels)
        for logical, spec in enumerate(slides, start=1):
            phys = physical[logical - 1]
            if corrupt_slide == logical:
                xml = "<p:sld><not-closed>"
            else:
                xml = _slide_xml(spec.get("title"), spec.get("bodies", []))
            zf.writestr(f"ppt/slides/slide{phys}.xml", xml)
            if spec.get("notes"):
                slide_rels = f"""<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Relationships xmlns="{REL_NS}">
  <Relationship Id="rId99"
    Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/notesSlide"
    Target="../notesSlides/notesSlide{phys}.xml"/>
</Relationships>"""
                zf.writestr(f"ppt/slides/_rels/slide{phys}.xml.rels", slide_rels)
                zf.writestr(f"ppt/notesSlides/notesSlide{phys}.xml", _notes_xml(spec["notes"]))
    return buf.getvalue()


def simple_deck(n: int = 3) -> bytes:
    return build_pptx(
        [
            {"title": f"Slide {i}", "bodies": [f"Point one of slide {i}", f"Point two of slide {i}"]}
            for i in range(1, n + 1)
        ]
    )


def tone_silence_wav(spans: list[tuple[str, int]], sample_rate_hz: int = 16000, amplitude: float = 0.5) -> bytes:
    """Concatenate ("tone"|"silence", duration_ms) spans into one WAV."""
    import numpy as np

    from presentcoach import wav

    pieces = []
    for kind, duration_ms in spans:
        frames = round(duration_ms * sample_rate_hz / 1000)
        if kind == "silence":
            pieces.append(np.zeros(frames, dtype=np.int16))
        else:
            t = np.arange(frames) / sample_rate_hz
            pieces.append((amplitude * 32767 * np.sin(2 * np.pi * 440 * t)).astype(np.int16))
    return wav.write_wav(np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int16), sample_rate_hz)


def coaching_session(store, n_slides: int = 3, segment_ms: int | None = None):
    """A session advanced to the coaching stage, with deck, script, ideal
    audio and exemplar documents wired together the way the pipeline writes
    them. Returns (session, exemplar, script, practice)."""
    from datetime import timezone
    from presentcoach import wav
    from presentcoach.coach import PracticeRecording
    from presentcoach.deck import TestRenderer, ingest_deck
    from presentcoach.script import NarrationScript, ScriptSegment, length_flag
    from presentcoach.store import Stage, new_id, utcnow
    from presentcoach.video import ExemplarVideo, build_manifest
    from presentcoach.voice import AudioSegment

    deck = ingest_deck(simple_deck(n_slides), TestRenderer(), store)

    segments = []
    for i in range(1, n_slides + 1):
        text = " ".join(f"slide{i}word{j}" for j in range(70)) + "."
        segments.append(ScriptSegment(i, text, 70, length_flag(70), 1))
    script = NarrationScript(deck.id, segments, "f" * 64)
    script_id = new_id()
    store.write_doc("scripts", script_id, script.to_dict())

    durations = [segment_ms or (2000 + 500 * i) for i in range(1, n_slides + 1)]
    audio_segments = []
    for i, d in enumerate(durations, start=1):
        blob = store.put_blob(wav.sine_tone(d, 16000), "wav")
        audio_segments.append(AudioSegment(i, blob.content_hash, d, 16000, 1, "cloned"))

    video_blob = store.put_blob(b"\x00\x00\x00\x18ftypmp42" + b"\x00" * 64, "mp4")
    manifest = build_manifest(durations)
    exemplar = ExemplarVideo(
        id=new_id(),
        video_ref=video_blob.content_hash,
        manifest=manifest,
        total_duration_ms=manifest[-1].end_ms,
        width=1920,
        height=1080,
        fps=30,
        deck_ref=deck.id,
        script_ref=script_id,
        audio_segments=audio_segments,
    )
    store.write_doc("exemplars", exemplar.id, exemplar.to_dict())

    session = store.create_session("non-specialist English course audience")
    store.attach_artifact(session.id, "deck", deck.id)
    store.attach_artifact(session.id, "voice", "voice-fixture")
    store.transition_stage(session.id, Stage.GENERATING)
    store.attach_artifact(session.id, "exemplar", exemplar.id)
    store.transition_stage(session.id, Stage.COACHING)

    practice_audio = tone_silence_wav(
        [("tone", 2000), ("silence", 400), ("tone", 1500), ("silence", 500), ("tone", 1000)]
    )
    blob = store.put_blob(practice_audio, "wav")
    practice = PracticeRecording(
        id=new_id(),
        session_ref=session.id,
        audio_ref=blob.content_hash,
        duration_ms=wav.measure_duration_ms(practice_audio),
        recorded_at=utcnow(),
    )
    store.write_doc("practices", practice.id, practice.to_dict())
    store.attach_artifact(session.id, "practice", practice.id)
    return store.load_session(session.id), exemplar, script, practice
