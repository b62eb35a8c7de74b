"""Per-slide narration script generation.

Scripts are generated sequentially so each slide's prompt can carry the tail
of the previous segment (smooth transitions). The 60-100 word target is soft:
out-of-range drafts are regenerated a bounded number of times with a
corrective instruction, then accepted with a length flag.
"""

from __future__ import annotations

import base64
import hashlib
import re
from dataclasses import dataclass
from typing import Optional

from .deck import Slide, SlideDeck
from .errors import PreconditionError, PresentCoachError
from .providers import ProviderClient, ProviderOutcome

WORD_TARGET_MIN = 60
WORD_TARGET_MAX = 100
DEFAULT_MAX_REGENERATIONS = 2

DEFAULT_INSTRUCTIONS = (
    "Write the narration for this slide in a natural spoken presentation register. "
    f"Target {WORD_TARGET_MIN}-{WORD_TARGET_MAX} words. Speak in English, first person, "
    "and keep the message of the slide front and center."
)


class ScriptGenerationError(PresentCoachError):
    code = "script"

    def __init__(self, slide_index: int, message: str, partial: Optional["NarrationScript"] = None):
        super().__init__(f"slide {slide_index}: {message}")
        self.slide_index = slide_index
        self.partial = partial


def count_words(text: str) -> int:
    """Maximal runs of non-whitespace; hyphenated compounds count once."""
    return len(text.split())


def length_flag(word_count: int) -> str:
    if word_count < WORD_TARGET_MIN:
        return "short"
    if word_count > WORD_TARGET_MAX:
        return "long"
    return "ok"


@dataclass
class ScriptSegment:
    slide_index: int
    text: str
    word_count: int
    length_flag: str
    revision: int

    def to_dict(self) -> dict:
        return {
            "slide_index": self.slide_index,
            "text": self.text,
            "word_count": self.word_count,
            "length_flag": self.length_flag,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScriptSegment":
        return cls(d["slide_index"], d["text"], d["word_count"], d["length_flag"], d["revision"])


@dataclass
class NarrationScript:
    deck_ref: str
    segments: list[ScriptSegment]
    generation_prompt_digest: str

    def to_dict(self) -> dict:
        return {
            "deck_ref": self.deck_ref,
            "segments": [s.to_dict() for s in self.segments],
            "generation_prompt_digest": self.generation_prompt_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NarrationScript":
        return cls(
            d["deck_ref"],
            [ScriptSegment.from_dict(s) for s in d["segments"]],
            d["generation_prompt_digest"],
        )

    def as_text(self) -> str:
        """Plain-text export with `## Slide N` headers (rendered in the UI)."""
        blocks = [f"## Slide {s.slide_index}\n\n{s.text}" for s in self.segments]
        return "\n\n".join(blocks) + "\n"


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def tail_sentences(text: str, n: int = 2) -> str:
    sentences = [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]
    return " ".join(sentences[-n:])


def build_script_prompt(
    slide: Slide,
    user_prompt: str,
    previous_segment: Optional[str],
    position: tuple[int, int],
    image_bytes: Optional[bytes] = None,
    corrective: Optional[str] = None,
) -> dict:
    """Provider request for one slide's narration."""
    if slide.image_ref is None and image_bytes is None:
        raise PreconditionError(f"slide {slide.index} has no rendered image")
    index, total = position
    request = {
        "task": "script",
        "position": {"index": index, "total": total},
        "slide_text": {
            "title": slide.title,
            "body": list(slide.body_texts),
            "notes": slide.notes,
        },
        "user_prompt": user_prompt,
        "instructions": DEFAULT_INSTRUCTIONS,
    }
    if image_bytes is not None:
        request["image_b64"] = base64.b64encode(image_bytes).decode("ascii")
    else:
        request["image_ref"] = slide.image_ref
    if previous_segment:
        request["previous_tail"] = tail_sentences(previous_segment)
        request["instructions"] += " Continue smoothly from the previous slide's narration."
    if corrective:
        request["instructions"] += " " + corrective
    return request


def generate_script(
    deck: SlideDeck,
    user_prompt: str,
    vlm: ProviderClient,
    store=None,
    max_regenerations: int = DEFAULT_MAX_REGENERATIONS,
    on_progress=None,
) -> NarrationScript:
    """One segment per slide, generated in index order."""
    segments: list[ScriptSegment] = []
    prompt_hasher = hashlib.sha256()
    previous_text: Optional[str] = None
    for slide in deck.slides:
        image = None
        if store is not None and slide.image_ref:
            from .store import BlobRef

            image = store.get_blob(BlobRef(slide.image_ref, "png", 1, slide.image_ref))
        corrective = None
        text = ""
        revision = 0
        flag = "short"
        for attempt in range(max_regenerations + 1):
            request = build_script_prompt(
                slide,
                user_prompt,
                previous_text,
                (slide.index, deck.slide_count),
                image_bytes=image,
                corrective=corrective,
            )
            prompt_hasher.update(repr({k: v for k, v in request.items() if k != "image_b64"}).encode())
            try:
                outcome: ProviderOutcome = vlm.invoke(request)
            except PresentCoachError as e:
                partial = NarrationScript(deck.id, segments, prompt_hasher.hexdigest())
                raise ScriptGenerationError(slide.index, str(e), partial=partial) from e
            text = (outcome.payload.get("text") or "").strip()
            revision = attempt + 1
            wc = count_words(text)
            flag = length_flag(wc)
            if flag == "ok":
                break
            corrective = (
                f"The previous draft had {wc} words; rewrite it with between "
                f"{WORD_TARGET_MIN} and {WORD_TARGET_MAX} words."
            )
        segments.append(
            ScriptSegment(
                slide_index=slide.index,
                text=text,
                word_count=count_words(text),
                length_flag=flag,
                revision=revision,
            )
        )
        previous_text = text
        if on_progress:
            on_progress(slide.index, deck.slide_count)
    return NarrationScript(
        deck_ref=deck.id,
        segments=segments,
        generation_prompt_digest=prompt_hasher.hexdigest(),
    )
