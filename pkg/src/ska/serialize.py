"""Canonical document serialization for the workbench.

One schema serves persistence, export, and import.  Exports are canonical:
entity lists are sorted deterministically and the JSON encoder is pinned,
so exporting the same state twice yields byte-identical files regardless
of insertion order.
"""
from __future__ import annotations

import json
from typing import Any

from .agreement import PhaseLabel
from .codebook import Codebook, CodebookRule
from .config import WorkbenchConfig
from .corpus import (
    AnnotationPhase,
    Chapter,
    ConceptAnnotation,
    NormalizedConcept,
    Section,
    Span,
    Textbook,
)
from .errors import ValidationError
from .protocol import Annotator, QualificationTest, Round, RoundPhase
from .review import ResolutionOutcome, ReviewVerdict
from .store import ResolutionRecord, ReviewRecord, Workbench

SCHEMA_VERSION = 1


def canonical_json(doc: dict[str, Any]) -> str:
    """The one true byte encoding of a document."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _span_dict(span: Span) -> dict[str, int]:
    return {"start": span.start, "end": span.end}


def _concept_dict(c: NormalizedConcept) -> dict[str, Any]:
    return {"value": c.value, "gram_length": c.gram_length}


def _annotation_dict(a: ConceptAnnotation) -> dict[str, Any]:
    return {
        "annotator_id": a.annotator_id,
        "section_id": a.section_id,
        "span": _span_dict(a.span),
        "surface": a.surface,
        "concept": _concept_dict(a.concept),
        "phase": a.phase.value,
        "round_id": a.round_id,
    }


def to_document(bench: Workbench, include_auth: bool = False) -> dict[str, Any]:
    """Serialize the full state.  Auth tokens only leave the process when
    the persistence layer asks for them; user-facing exports never carry
    credentials."""
    order = bench.section_order()

    def ann_key(a: ConceptAnnotation) -> tuple:
        return (
            order.get(a.section_id, len(order)),
            a.span.start,
            a.span.end,
            a.concept.value,
            a.annotator_id,
            a.phase.value,
        )

    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "participants": bench.config.participants,
            "qualification_threshold": bench.config.qualification_threshold,
            "min_section_chars": bench.config.min_section_chars,
            "database": bench.config.database,
        },
        "textbooks": [
            {
                "id": book.id,
                "title": book.title,
                "chapters": [
                    {
                        "id": ch.id,
                        "index": ch.index,
                        "title": ch.title,
                        "sections": [
                            {
                                "id": s.id,
                                "heading": s.heading,
                                "body": s.body,
                                "char_count": s.char_count,
                            }
                            for s in ch.sections
                        ],
                    }
                    for ch in book.chapters
                ],
            }
            for book in sorted(bench.textbooks.values(), key=lambda b: b.id)
        ],
        "annotators": [
            {
                "id": a.id,
                "display_name": a.display_name,
                "qualified": a.qualified,
                "qualification_score": a.qualification_score,
            }
            for a in sorted(bench.annotators.values(), key=lambda a: a.id)
        ],
        "qualification_test": None
        if bench.qualification_test is None
        else {
            "gold_section_id": bench.qualification_test.gold_section_id,
            "gold_concepts": sorted(
                (_concept_dict(c) for c in bench.qualification_test.gold_concepts),
                key=lambda d: d["value"],
            ),
            "threshold": bench.qualification_test.threshold,
        },
        "rounds": [
            {
                "id": r.id,
                "index": r.index,
                "chapter_id": r.chapter_id,
                "participants": list(r.participants),
                "lead_id": r.lead_id,
                "phase": r.phase.value,
                "submitted": {k: list(v) for k, v in sorted(r.submitted.items())},
                "version": r.version,
            }
            for r in (bench.rounds[rid] for rid in bench.round_order)
        ],
        "annotations": [
            _annotation_dict(a) for a in sorted(bench.annotations, key=ann_key)
        ],
        "review_log": [
            {
                "round_id": rec.round_id,
                "reviewer_id": rec.reviewer_id,
                "section_id": rec.section_id,
                "concept": _concept_dict(rec.concept),
                "verdict": rec.verdict.value,
                "tagged_by": list(rec.tagged_by),
                "span": None if rec.span is None else _span_dict(rec.span),
                "rationale": rec.rationale,
            }
            for rec in bench.review_log
        ],
        "resolution_log": [
            {
                "round_id": rec.round_id,
                "section_id": rec.section_id,
                "concept": _concept_dict(rec.concept),
                "outcome": rec.outcome.value,
                "span": None if rec.span is None else _span_dict(rec.span),
                "rule_suggestions": list(rec.rule_suggestions),
            }
            for rec in bench.resolution_log
        ],
        "codebook": [
            {
                "id": rule.id,
                "text": rule.text,
                "examples": [list(pair) for pair in rule.examples],
                "round_introduced": rule.round_introduced,
                "amendments": [list(pair) for pair in rule.amendments],
            }
            for rule in bench.codebook.rules
        ],
    }
    if include_auth:
        doc["tokens"] = {
            token: annotator_id for token, annotator_id in sorted(bench.tokens.items())
        }
    return doc


def _require(doc: dict[str, Any], key: str) -> Any:
    if key not in doc:
        raise ValidationError(f"document is missing '{key}'")
    return doc[key]


def _load_concept(d: dict[str, Any]) -> NormalizedConcept:
    return NormalizedConcept(value=d["value"], gram_length=d["gram_length"])


def _load_span(d: dict[str, Any]) -> Span:
    return Span(start=d["start"], end=d["end"])


def from_document(doc: dict[str, Any]) -> Workbench:
    """Rebuild a workbench.  Raises ValidationError on unusable documents,
    including the text-free export flavor, which is a report, not a state."""
    if not isinstance(doc, dict):
        raise ValidationError("document must be a JSON object")
    if doc.get("document_type") == "concept_lists":
        raise ValidationError(
            "this is a text-free concept-list export; it cannot be imported"
        )
    version = _require(doc, "schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    cfg = doc.get("config") or {}
    bench = Workbench(
        config=WorkbenchConfig(
            participants=cfg.get("participants", 3),
            qualification_threshold=cfg.get("qualification_threshold", 0.6),
            min_section_chars=cfg.get("min_section_chars", 200),
            database=cfg.get("database", "ska.db"),
        )
    )
    try:
        for b in _require(doc, "textbooks"):
            chapters = []
            for ch in b["chapters"]:
                sections = [
                    Section(
                        id=s["id"],
                        heading=s["heading"],
                        body=s["body"],
                        char_count=s["char_count"],
                    )
                    for s in ch["sections"]
                ]
                chapters.append(
                    Chapter(
                        id=ch["id"], index=ch["index"], title=ch["title"],
                        sections=sections,
                    )
                )
            book = Textbook(id=b["id"], title=b["title"], chapters=chapters)
            bench.textbooks[book.id] = book
        for a in _require(doc, "annotators"):
            bench.annotators[a["id"]] = Annotator(
                id=a["id"],
                display_name=a["display_name"],
                qualified=a["qualified"],
                qualification_score=a["qualification_score"],
            )
        qt = doc.get("qualification_test")
        if qt is not None:
            bench.qualification_test = QualificationTest(
                gold_section_id=qt["gold_section_id"],
                gold_concepts=frozenset(
                    _load_concept(c) for c in qt["gold_concepts"]
                ),
                threshold=qt["threshold"],
            )
        for r in _require(doc, "rounds"):
            rnd = Round(
                id=r["id"],
                index=r["index"],
                chapter_id=r["chapter_id"],
                participants=tuple(r["participants"]),
                lead_id=r["lead_id"],
                phase=RoundPhase(r["phase"]),
                submitted={k: list(v) for k, v in r["submitted"].items()},
                version=r["version"],
            )
            bench.rounds[rnd.id] = rnd
            bench.round_order.append(rnd.id)
        for a in _require(doc, "annotations"):
            bench.annotations.append(
                ConceptAnnotation(
                    annotator_id=a["annotator_id"],
                    section_id=a["section_id"],
                    span=_load_span(a["span"]),
                    surface=a["surface"],
                    concept=_load_concept(a["concept"]),
                    phase=AnnotationPhase(a["phase"]),
                    round_id=a["round_id"],
                )
            )
        for rec in doc.get("review_log", []):
            bench.review_log.append(
                ReviewRecord(
                    round_id=rec["round_id"],
                    reviewer_id=rec["reviewer_id"],
                    section_id=rec["section_id"],
                    concept=_load_concept(rec["concept"]),
                    verdict=ReviewVerdict(rec["verdict"]),
                    tagged_by=tuple(rec["tagged_by"]),
                    span=None if rec["span"] is None else _load_span(rec["span"]),
                    rationale=rec["rationale"],
                )
            )
        for rec in doc.get("resolution_log", []):
            bench.resolution_log.append(
                ResolutionRecord(
                    round_id=rec["round_id"],
                    section_id=rec["section_id"],
                    concept=_load_concept(rec["concept"]),
                    outcome=ResolutionOutcome(rec["outcome"]),
                    span=None if rec["span"] is None else _load_span(rec["span"]),
                    rule_suggestions=tuple(rec["rule_suggestions"]),
                )
            )
        rules = [
            CodebookRule(
                id=rule["id"],
                text=rule["text"],
                examples=tuple(tuple(p) for p in rule["examples"]),
                round_introduced=rule["round_introduced"],
                amendments=tuple(tuple(p) for p in rule["amendments"]),
            )
            for rule in _require(doc, "codebook")
        ]
        bench.codebook = Codebook(rules=rules)
        for token, annotator_id in (doc.get("tokens") or {}).items():
            bench.tokens[token] = annotator_id
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed document: {exc!r}") from exc
    return bench


def concepts_document(
    bench: Workbench, label: PhaseLabel = PhaseLabel.AFTER_DISCUSSION
) -> dict[str, Any]:
    """Text-free deliverable: per-section consensus concept lists for every
    closed round.  Deliberately not importable; the source text stays out."""
    sections: list[dict[str, Any]] = []
    for rid in bench.round_order:
        r = bench.rounds[rid]
        if r.phase is not RoundPhase.CLOSED:
            continue
        phases = (
            ("initial", "missed_review")
            if label is PhaseLabel.BEFORE_DISCUSSION
            else ("initial", "missed_review", "post_discussion")
        )
        from .corpus import AnnotationPhase as AP

        per_section = bench._annotation_sets(
            r,
            tuple(AP(p) for p in phases),
            exclude_dropped=label is PhaseLabel.AFTER_DISCUSSION,
        )
        for section_id, sets in per_section:
            if not sets:
                continue
            consensus = set.intersection(*(set(s) for s in sets.values()))
            sections.append(
                {
                    "round_id": r.id,
                    "section_id": section_id,
                    "concepts": [
                        _concept_dict(c)
                        for c in sorted(consensus, key=lambda c: c.value)
                    ],
                }
            )
    return {
        "document_type": "concept_lists",
        "schema_version": SCHEMA_VERSION,
        "phase": label.value,
        "sections": sections,
    }
