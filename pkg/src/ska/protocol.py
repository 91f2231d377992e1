"""Round lifecycle state machine and annotator qualification.

A round walks the fixed phase sequence annotating -> missed_review ->
discussion -> codebook_update -> closed.  Annotating and missed_review
collect one submission per participant; discussion and codebook_update are
group phases completed by the round lead alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .agreement import pairwise_agreement
from .corpus import NormalizedConcept
from .errors import (
    ArityError,
    AuthorizationError,
    ConflictError,
    PhaseError,
    QualificationError,
    ValidationError,
)


class RoundPhase(str, Enum):
    ANNOTATING = "annotating"
    MISSED_REVIEW = "missed_review"
    DISCUSSION = "discussion"
    CODEBOOK_UPDATE = "codebook_update"
    CLOSED = "closed"


PHASE_ORDER = [
    RoundPhase.ANNOTATING,
    RoundPhase.MISSED_REVIEW,
    RoundPhase.DISCUSSION,
    RoundPhase.CODEBOOK_UPDATE,
    RoundPhase.CLOSED,
]

GROUP_PHASES = {RoundPhase.DISCUSSION, RoundPhase.CODEBOOK_UPDATE}


@dataclass
class Annotator:
    id: str
    display_name: str = ""
    qualified: bool = False
    qualification_score: float | None = None


@dataclass(frozen=True)
class QualificationTest:
    """Gold concept set for one section plus the passing threshold."""

    gold_section_id: str
    gold_concepts: frozenset[NormalizedConcept]
    threshold: float = 0.6

    def __post_init__(self):
        if not self.gold_concepts:
            raise ValidationError("qualification test needs a non-empty gold set")
        if not 0 < self.threshold <= 1:
            raise ValidationError("qualification threshold must be in (0, 1]")


def evaluate_qualification(
    candidate_concepts: frozenset[NormalizedConcept] | set[NormalizedConcept],
    test: QualificationTest,
) -> tuple[float, bool]:
    """Score a candidate set against the gold set (Jaccard) and gate it."""
    score = pairwise_agreement(candidate_concepts, test.gold_concepts)
    return score, score >= test.threshold


@dataclass
class Round:
    """Per-chapter protocol instance.

    `submitted` maps each phase value to the sorted ids that completed it;
    `version` increments on every state transition so the persistence layer
    can compare-and-advance.
    """

    id: str
    index: int
    chapter_id: str
    participants: tuple[str, ...]
    lead_id: str
    phase: RoundPhase = RoundPhase.ANNOTATING
    submitted: dict[str, list[str]] = field(default_factory=dict)
    version: int = 0

    def submitted_for(self, phase: RoundPhase) -> list[str]:
        return self.submitted.get(phase.value, [])

    def has_submitted(self, phase: RoundPhase, annotator_id: str) -> bool:
        return annotator_id in self.submitted_for(phase)

    def require_phase(self, expected: RoundPhase) -> None:
        if self.phase is not expected:
            raise PhaseError(
                f"round '{self.id}' is in phase '{self.phase.value}', "
                f"operation requires '{expected.value}'"
            )

    def record_submission(self, phase: RoundPhase, annotator_id: str) -> None:
        """Record one submission and auto-advance when the phase is complete."""
        self.require_phase(phase)
        if annotator_id not in self.participants:
            raise AuthorizationError(
                f"'{annotator_id}' is not a participant of round '{self.id}'"
            )
        if phase in GROUP_PHASES and annotator_id != self.lead_id:
            raise AuthorizationError(
                f"phase '{phase.value}' takes one group submission "
                f"by the round lead '{self.lead_id}'"
            )
        if self.has_submitted(phase, annotator_id):
            raise ConflictError(
                f"'{annotator_id}' already submitted phase '{phase.value}' "
                f"of round '{self.id}'"
            )
        entries = self.submitted.setdefault(phase.value, [])
        entries.append(annotator_id)
        entries.sort()
        self.version += 1
        if self._phase_complete(phase):
            self._advance()

    def _phase_complete(self, phase: RoundPhase) -> bool:
        if phase in GROUP_PHASES:
            return self.has_submitted(phase, self.lead_id)
        return set(self.submitted_for(phase)) == set(self.participants)

    def _advance(self) -> None:
        self.phase = PHASE_ORDER[PHASE_ORDER.index(self.phase) + 1]
        self.version += 1


def create_round(
    round_id: str,
    index: int,
    chapter_id: str,
    participants: list[Annotator],
    lead_id: str | None = None,
) -> Round:
    """Validate participants and open a round in the annotating phase."""
    ids = sorted({a.id for a in participants})
    if len(ids) < 2:
        raise ArityError(f"a round needs at least 2 participants, got {len(ids)}")
    unqualified = sorted(a.id for a in participants if not a.qualified)
    if unqualified:
        raise QualificationError(
            "unqualified participants: " + ", ".join(unqualified)
        )
    lead = lead_id if lead_id is not None else ids[0]
    if lead not in ids:
        raise ValidationError(f"lead '{lead}' is not among the participants")
    return Round(
        id=round_id,
        index=index,
        chapter_id=chapter_id,
        participants=tuple(ids),
        lead_id=lead,
    )
