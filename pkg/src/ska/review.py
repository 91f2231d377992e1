"""Missed-concept review material and discussion resolutions.

Nothing in this module ever deletes an annotation: review acceptance adds
annotations, rejections are logged, and dropped cases are excluded from the
after-discussion consensus at report time while the original annotations
keep their phase provenance.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import AbstractSet, Mapping, Sequence

from .corpus import NormalizedConcept, Span


class ReviewVerdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class ResolutionOutcome(str, Enum):
    PROMOTE = "promote"
    DROP = "drop"


@dataclass(frozen=True)
class MissedConceptCandidate:
    """A concept tagged by at least one peer but absent from the reviewer's set."""

    section_id: str
    concept: NormalizedConcept
    tagged_by: tuple[str, ...]
    reviewer: str


@dataclass(frozen=True)
class ReviewDecision:
    section_id: str
    concept: NormalizedConcept
    verdict: ReviewVerdict
    span: Span | None = None  # required for ACCEPT: locate in the original text
    rationale: str = ""


@dataclass(frozen=True)
class Resolution:
    section_id: str
    concept: NormalizedConcept
    outcome: ResolutionOutcome
    span: Span | None = None  # promotion span; auto-filled when omitted
    rule_suggestions: tuple[str, ...] = ()


def missed_candidates(
    reviewer: str,
    per_section: Sequence[tuple[str, Mapping[str, AbstractSet[NormalizedConcept]]]],
) -> list[MissedConceptCandidate]:
    """Concepts tagged by peers but not by the reviewer, in section order.

    Within a section, candidates sort by concept value.  The reviewer's own
    set plus these candidates always equals the union of everyone's sets.
    """
    out: list[MissedConceptCandidate] = []
    for section_id, sets in per_section:
        own = sets.get(reviewer, frozenset())
        missed: dict[NormalizedConcept, list[str]] = {}
        for annotator_id in sorted(sets):
            if annotator_id == reviewer:
                continue
            for concept in sets[annotator_id]:
                if concept not in own:
                    missed.setdefault(concept, []).append(annotator_id)
        for concept in sorted(missed, key=lambda c: c.value):
            out.append(
                MissedConceptCandidate(
                    section_id=section_id,
                    concept=concept,
                    tagged_by=tuple(missed[concept]),
                    reviewer=reviewer,
                )
            )
    return out


def candidates_csv(candidates: Sequence[MissedConceptCandidate]) -> str:
    """Review file as CSV, the machine form of the shared results file."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section_id", "concept", "tagged_by", "reviewer"])
    for c in candidates:
        writer.writerow([c.section_id, c.concept.value, "|".join(c.tagged_by), c.reviewer])
    return buf.getvalue()


@dataclass(frozen=True)
class DisagreementCase:
    """A (section, concept) pair with support below the participant count."""

    section_id: str
    concept: NormalizedConcept
    tagged_by: tuple[str, ...]
    support: int


def disagreement_cases(
    per_section: Sequence[tuple[str, Mapping[str, AbstractSet[NormalizedConcept]]]],
) -> list[DisagreementCase]:
    """All current disagreement cases, ordered by (section order, concept value)."""
    out: list[DisagreementCase] = []
    for section_id, sets in per_section:
        n = len(sets)
        tagged: dict[NormalizedConcept, list[str]] = {}
        for annotator_id in sorted(sets):
            for concept in sets[annotator_id]:
                tagged.setdefault(concept, []).append(annotator_id)
        for concept in sorted(tagged, key=lambda c: c.value):
            who = tagged[concept]
            if len(who) < n:
                out.append(
                    DisagreementCase(
                        section_id=section_id,
                        concept=concept,
                        tagged_by=tuple(who),
                        support=len(who),
                    )
                )
    return out
