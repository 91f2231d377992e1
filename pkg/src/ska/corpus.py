"""Domain model for sectioned textbooks and normalized concepts.

Offsets everywhere count Unicode scalar values (Python string indices),
never bytes or UTF-16 units, so spans travel unchanged between the store,
the HTTP API, and the web client.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    EmptyInputError,
    FormatError,
    InvalidSurfaceError,
    SpanBoundsError,
)


@dataclass(frozen=True)
class Span:
    """Half-open character range [start, end) within one section body."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise SpanBoundsError(f"invalid span [{self.start}, {self.end})")


@dataclass(frozen=True)
class NormalizedConcept:
    """Canonical form of a tagged surface: lowercased, NFC, single-spaced.

    gram_length is the whitespace token count; hyphens and slashes do not
    split tokens, so "tf-idf" is a 1-gram.
    """

    value: str
    gram_length: int


@dataclass
class Section:
    id: str
    heading: str
    body: str
    char_count: int = field(default=-1)

    def __post_init__(self):
        if self.char_count < 0:
            self.char_count = len(self.body)


@dataclass
class Chapter:
    id: str
    index: int
    title: str
    sections: list[Section] = field(default_factory=list)


@dataclass
class Textbook:
    id: str
    title: str
    chapters: list[Chapter] = field(default_factory=list)

    def section_ids(self) -> list[str]:
        return [s.id for ch in self.chapters for s in ch.sections]


class AnnotationPhase(str, Enum):
    INITIAL = "initial"
    MISSED_REVIEW = "missed_review"
    POST_DISCUSSION = "post_discussion"


@dataclass(frozen=True)
class ConceptAnnotation:
    """One annotator's claim that the text at span denotes a concept."""

    annotator_id: str
    section_id: str
    span: Span
    surface: str
    concept: NormalizedConcept
    phase: AnnotationPhase
    round_id: str


def normalize(surface: str) -> NormalizedConcept:
    """Normalize a tagged surface into its canonical concept form.

    NFC first so case mapping sees composed characters, then lowercase,
    then whitespace runs collapse to single spaces with the ends trimmed.
    A final NFC pass keeps the result stable under re-normalization.
    """
    if not surface or not surface.strip():
        raise InvalidSurfaceError("surface contains no non-whitespace characters")
    tokens = unicodedata.normalize("NFC", surface).lower().split()
    value = unicodedata.normalize("NFC", " ".join(tokens))
    return NormalizedConcept(value=value, gram_length=len(value.split(" ")))


def extract_surface(section: Section, span: Span) -> str:
    """Return the exact substring of the section body at [start, end)."""
    if span.end > section.char_count:
        raise SpanBoundsError(
            f"span [{span.start}, {span.end}) exceeds section "
            f"'{section.id}' length {section.char_count}"
        )
    return section.body[span.start : span.end]


def find_occurrences(section: Section, concept: NormalizedConcept) -> list[Span]:
    """All spans in the section whose surface normalizes to the concept.

    Case-insensitive search with flexible internal whitespace; every hit is
    re-verified through normalize() so offsets are trustworthy.
    """
    pattern = re.compile(
        r"\s+".join(re.escape(tok) for tok in concept.value.split(" ")),
        re.IGNORECASE,
    )
    spans = []
    for m in pattern.finditer(section.body):
        span = Span(m.start(), m.end())
        if normalize(extract_surface(section, span)) == concept:
            spans.append(span)
    return spans


@dataclass
class IngestConfig:
    """Options for ingest_textbook; min_section_chars mirrors the merge of
    sections too short to stand alone into the section that follows them."""

    textbook_id: str = "book"
    title: str = ""
    min_section_chars: int = 200


_RawSection = tuple[str, int, str]  # heading, heading line number, body


def _merge_short_sections(sections: list[_RawSection], min_chars: int) -> list[_RawSection]:
    # A short section is folded into the following one (cascading); a short
    # final section has nothing to merge into and stays as is.
    out: list[_RawSection] = []
    carry: _RawSection | None = None
    for i, (heading, line, body) in enumerate(sections):
        if carry is not None:
            heading = f"{carry[0]} / {heading}"
            line = carry[1]
            body = f"{carry[2]}\n{body}"
            carry = None
        if len(body) < min_chars and i < len(sections) - 1:
            carry = (heading, line, body)
        else:
            out.append((heading, line, body))
    assert carry is None
    return out


def ingest_textbook(raw: str, config: IngestConfig | None = None) -> Textbook:
    """Parse a sectioned plain-text document into a Textbook.

    Format: UTF-8 text where a line starting with "# " opens a chapter and
    a line starting with "## " opens a section; everything until the next
    heading is the section body.  Bodies keep their internal whitespace and
    lose only leading/trailing blank space.
    """
    config = config or IngestConfig()
    if not raw.strip():
        raise EmptyInputError("document contains no content")

    chapters: list[tuple[str, int, list[tuple[str, int, list[str]]]]] = []
    current_body: list[str] | None = None
    for line_no, line in enumerate(raw.split("\n"), start=1):
        if line.startswith("# "):
            chapters.append((line[2:].strip(), line_no, []))
            current_body = None
        elif line.startswith("## "):
            if not chapters:
                raise FormatError("section heading before any chapter heading", line_no)
            current_body = []
            chapters[-1][2].append((line[3:].strip(), line_no, current_body))
        elif current_body is not None:
            current_body.append(line)
        elif line.strip():
            if not chapters:
                raise FormatError("content before first chapter heading", line_no)
            raise FormatError("chapter text outside any section", line_no)

    book = Textbook(id=config.textbook_id, title=config.title or config.textbook_id)
    for c_idx, (title, _line, raw_sections) in enumerate(chapters, start=1):
        parsed: list[_RawSection] = []
        for heading, line_no, lines in raw_sections:
            body = "\n".join(lines).strip()
            if not body:
                raise FormatError(f"section '{heading}' has an empty body", line_no)
            parsed.append((heading, line_no, body))
        chapter_id = f"{config.textbook_id}.c{c_idx:02d}"
        chapter = Chapter(id=chapter_id, index=c_idx, title=title)
        for s_idx, (heading, _line, body) in enumerate(
            _merge_short_sections(parsed, config.min_section_chars), start=1
        ):
            chapter.sections.append(
                Section(id=f"{chapter_id}.s{s_idx:02d}", heading=heading, body=body)
            )
        book.chapters.append(chapter)
    return book


def make_annotation(
    section: Section,
    annotator_id: str,
    span: Span,
    phase: AnnotationPhase,
    round_id: str,
) -> ConceptAnnotation:
    """Build an annotation whose surface/concept invariants hold by construction."""
    surface = extract_surface(section, span)
    return ConceptAnnotation(
        annotator_id=annotator_id,
        section_id=section.id,
        span=span,
        surface=surface,
        concept=normalize(surface),
        phase=phase,
        round_id=round_id,
    )
