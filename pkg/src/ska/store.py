"""In-memory workbench state and every operation the protocol exposes.

The Workbench owns all domain state and funnels every mutation through the
round state machine, so the protocol guards cannot be bypassed by any
caller (CLI, HTTP, or tests).  Persistence wraps this class, it never
reaches around it.
"""
from __future__ import annotations

import copy
import secrets
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import agreement, review, stats
from .agreement import AgreementReport, PhaseLabel
from .codebook import Codebook, CodebookChange, apply_changes
from .config import WorkbenchConfig
from .corpus import (
    AnnotationPhase,
    ConceptAnnotation,
    IngestConfig,
    NormalizedConcept,
    Section,
    Span,
    Textbook,
    extract_surface,
    find_occurrences,
    ingest_textbook,
    make_annotation,
    normalize,
)
from .errors import (
    ArityError,
    ConflictError,
    EmptyRangeError,
    IncompleteDataError,
    LocateMismatchError,
    NotADisagreementError,
    NotFoundError,
    ValidationError,
)
from .protocol import (
    Annotator,
    QualificationTest,
    Round,
    RoundPhase,
    create_round,
    evaluate_qualification,
)
from .review import (
    DisagreementCase,
    MissedConceptCandidate,
    Resolution,
    ResolutionOutcome,
    ReviewDecision,
    ReviewVerdict,
)

BEFORE_PHASES = (AnnotationPhase.INITIAL, AnnotationPhase.MISSED_REVIEW)
AFTER_PHASES = BEFORE_PHASES + (AnnotationPhase.POST_DISCUSSION,)


@dataclass(frozen=True)
class ReviewRecord:
    """A logged review decision, kept for the audit trail."""

    round_id: str
    reviewer_id: str
    section_id: str
    concept: NormalizedConcept
    verdict: ReviewVerdict
    tagged_by: tuple[str, ...]
    span: Span | None = None
    rationale: str = ""


@dataclass(frozen=True)
class ResolutionRecord:
    round_id: str
    section_id: str
    concept: NormalizedConcept
    outcome: ResolutionOutcome
    span: Span | None = None
    rule_suggestions: tuple[str, ...] = ()


@dataclass
class Workbench:
    config: WorkbenchConfig = field(default_factory=WorkbenchConfig)
    textbooks: dict[str, Textbook] = field(default_factory=dict)
    annotators: dict[str, Annotator] = field(default_factory=dict)
    tokens: dict[str, str] = field(default_factory=dict)  # token -> annotator id
    qualification_test: QualificationTest | None = None
    rounds: dict[str, Round] = field(default_factory=dict)
    round_order: list[str] = field(default_factory=list)
    annotations: list[ConceptAnnotation] = field(default_factory=list)
    review_log: list[ReviewRecord] = field(default_factory=list)
    resolution_log: list[ResolutionRecord] = field(default_factory=list)
    codebook: Codebook = field(default_factory=Codebook)

    # -- lookups ----------------------------------------------------------

    def section(self, section_id: str) -> Section:
        for book in self.textbooks.values():
            for chapter in book.chapters:
                for section in chapter.sections:
                    if section.id == section_id:
                        return section
        raise NotFoundError(f"no section '{section_id}'")

    def chapter_sections(self, chapter_id: str) -> list[Section]:
        for book in self.textbooks.values():
            for chapter in book.chapters:
                if chapter.id == chapter_id:
                    return list(chapter.sections)
        raise NotFoundError(f"no chapter '{chapter_id}'")

    def section_order(self) -> dict[str, int]:
        """Document-order rank for every section id, for canonical sorting."""
        order: dict[str, int] = {}
        for book in sorted(self.textbooks.values(), key=lambda b: b.id):
            for chapter in book.chapters:
                for section in chapter.sections:
                    order[section.id] = len(order)
        return order

    def annotator(self, annotator_id: str) -> Annotator:
        try:
            return self.annotators[annotator_id]
        except KeyError:
            raise NotFoundError(f"no annotator '{annotator_id}'") from None

    def round(self, round_id: str) -> Round:
        try:
            return self.rounds[round_id]
        except KeyError:
            raise NotFoundError(f"no round '{round_id}'") from None

    def round_by_index(self, index: int) -> Round:
        for r in self.rounds.values():
            if r.index == index:
                return r
        raise NotFoundError(f"no round with index {index}")

    def annotator_for_token(self, token: str) -> str | None:
        return self.tokens.get(token)

    # -- setup ------------------------------------------------------------

    def ingest(self, raw: str, config: IngestConfig | None = None) -> Textbook:
        config = config or IngestConfig(min_section_chars=self.config.min_section_chars)
        book = ingest_textbook(raw, config)
        if book.id in self.textbooks:
            raise ConflictError(f"textbook '{book.id}' already exists")
        self.textbooks[book.id] = book
        return book

    def add_annotator(self, annotator_id: str, display_name: str = "") -> tuple[Annotator, str]:
        """Register an annotator and issue their bearer token."""
        if not annotator_id or not annotator_id.strip():
            raise ValidationError("annotator id must be non-empty")
        if annotator_id in self.annotators:
            raise ConflictError(f"annotator '{annotator_id}' already exists")
        annotator = Annotator(id=annotator_id, display_name=display_name or annotator_id)
        self.annotators[annotator_id] = annotator
        token = secrets.token_hex(16)
        self.tokens[token] = annotator_id
        return annotator, token

    def set_qualification_test(
        self,
        gold_section_id: str,
        gold_concepts: Iterable[NormalizedConcept],
        threshold: float | None = None,
    ) -> QualificationTest:
        self.section(gold_section_id)  # must exist
        test = QualificationTest(
            gold_section_id=gold_section_id,
            gold_concepts=frozenset(gold_concepts),
            threshold=threshold if threshold is not None else self.config.qualification_threshold,
        )
        self.qualification_test = test
        return test

    def qualify(
        self, annotator_id: str, candidate_concepts: Iterable[NormalizedConcept]
    ) -> tuple[float, bool]:
        """Score a candidate against the gold section; records the outcome."""
        if self.qualification_test is None:
            raise ValidationError("no qualification test configured")
        annotator = self.annotator(annotator_id)
        score, passed = evaluate_qualification(
            frozenset(candidate_concepts), self.qualification_test
        )
        annotator.qualification_score = score
        annotator.qualified = passed
        return score, passed

    def seed_codebook(self, changes: Sequence[CodebookChange]) -> int:
        """Install seed rules (round 0); only legal before any round closes."""
        if any(r.phase is RoundPhase.CLOSED for r in self.rounds.values()):
            raise ValidationError("seed rules can only be added before any round closes")
        return len(apply_changes(self.codebook, changes, round_index=0))

    # -- round lifecycle --------------------------------------------------

    def create_round(
        self,
        chapter_id: str,
        participant_ids: Sequence[str] | None = None,
        lead_id: str | None = None,
    ) -> Round:
        self.chapter_sections(chapter_id)  # must exist
        for r in self.rounds.values():
            if r.chapter_id == chapter_id and r.phase is not RoundPhase.CLOSED:
                raise ConflictError(
                    f"chapter '{chapter_id}' already has an open round '{r.id}'"
                )
        if participant_ids is None:
            participant_ids = sorted(a.id for a in self.annotators.values() if a.qualified)
            if len(participant_ids) != self.config.participants:
                raise ArityError(
                    f"expected {self.config.participants} qualified annotators "
                    f"to form a round, found {len(participant_ids)}; "
                    "pass participants explicitly"
                )
        participants = [self.annotator(a) for a in participant_ids]
        index = len(self.round_order) + 1
        r = create_round(f"r{index}", index, chapter_id, participants, lead_id)
        self.rounds[r.id] = r
        self.round_order.append(r.id)
        return r

    def submit_annotations(
        self, round_id: str, annotator_id: str, spans: Sequence[tuple[str, Span]]
    ) -> Round:
        """Annotating-phase submission: the annotator's full span list."""
        r = self.round(round_id)
        r.require_phase(RoundPhase.ANNOTATING)
        built: list[ConceptAnnotation] = []
        seen: set[tuple[str, int, int]] = set()
        for section_id, span in spans:
            section = self._round_section(r, section_id)
            ann = make_annotation(
                section, annotator_id, span, AnnotationPhase.INITIAL, r.id
            )
            key = (section_id, span.start, span.end)
            if key in seen:
                raise ValidationError(
                    f"duplicate annotation at {section_id}[{span.start}:{span.end}]"
                )
            seen.add(key)
            built.append(ann)
        self._reject_duplicates(r.id, built)
        r.record_submission(RoundPhase.ANNOTATING, annotator_id)
        self.annotations.extend(built)
        return r

    def review_candidates(self, round_id: str, reviewer_id: str) -> list[MissedConceptCandidate]:
        """The reviewer's missed-concept file for the missed_review phase."""
        r = self.round(round_id)
        r.require_phase(RoundPhase.MISSED_REVIEW)
        if reviewer_id not in r.participants:
            raise NotFoundError(f"'{reviewer_id}' is not a participant of '{round_id}'")
        return review.missed_candidates(reviewer_id, self._annotation_sets(r, BEFORE_PHASES))

    def submit_review(
        self, round_id: str, reviewer_id: str, decisions: Sequence[ReviewDecision]
    ) -> Round:
        """Missed-review submission: accept decisions must locate the concept
        in the original text; the whole batch validates before anything lands."""
        r = self.round(round_id)
        r.require_phase(RoundPhase.MISSED_REVIEW)
        candidates = {
            (c.section_id, c.concept): c
            for c in review.missed_candidates(reviewer_id, self._annotation_sets(r, BEFORE_PHASES))
        } if reviewer_id in r.participants else {}
        new_annotations: list[ConceptAnnotation] = []
        records: list[ReviewRecord] = []
        seen: set[tuple[str, NormalizedConcept]] = set()
        for d in decisions:
            key = (d.section_id, d.concept)
            if key in seen:
                raise ValidationError(
                    f"duplicate decision for '{d.concept.value}' in {d.section_id}"
                )
            seen.add(key)
            candidate = candidates.get(key)
            if candidate is None:
                raise ValidationError(
                    f"'{d.concept.value}' in {d.section_id} is not a missed-concept "
                    f"candidate for '{reviewer_id}'"
                )
            span = None
            if d.verdict is ReviewVerdict.ACCEPT:
                if d.span is None:
                    raise LocateMismatchError(
                        f"accepting '{d.concept.value}' requires locating it in the text"
                    )
                section = self._round_section(r, d.section_id)
                surface = extract_surface(section, d.span)
                if normalize(surface) != d.concept:
                    raise LocateMismatchError(
                        f"span [{d.span.start}, {d.span.end}) reads '{surface}', "
                        f"which does not normalize to '{d.concept.value}'"
                    )
                span = d.span
                new_annotations.append(
                    make_annotation(
                        section, reviewer_id, span, AnnotationPhase.MISSED_REVIEW, r.id
                    )
                )
            records.append(
                ReviewRecord(
                    round_id=r.id,
                    reviewer_id=reviewer_id,
                    section_id=d.section_id,
                    concept=d.concept,
                    verdict=d.verdict,
                    tagged_by=candidate.tagged_by,
                    span=span,
                    rationale=d.rationale,
                )
            )
        r.record_submission(RoundPhase.MISSED_REVIEW, reviewer_id)
        self.annotations.extend(new_annotations)
        self.review_log.extend(records)
        return r

    def disagreements(self, round_id: str) -> list[DisagreementCase]:
        r = self.round(round_id)
        self._require_complete(r, PhaseLabel.BEFORE_DISCUSSION)
        return review.disagreement_cases(self._annotation_sets(r, BEFORE_PHASES))

    def submit_resolutions(
        self, round_id: str, actor_id: str, resolutions: Sequence[Resolution]
    ) -> Round:
        """Discussion-phase group submission by the round lead.

        Promotions create post_discussion annotations for every participant
        missing the concept; drops only mark the case excluded from the
        after-discussion consensus.  Unresolved cases simply stay open.
        """
        r = self.round(round_id)
        r.require_phase(RoundPhase.DISCUSSION)
        cases = {
            (c.section_id, c.concept): c
            for c in review.disagreement_cases(self._annotation_sets(r, BEFORE_PHASES))
        }
        new_annotations: list[ConceptAnnotation] = []
        records: list[ResolutionRecord] = []
        seen: set[tuple[str, NormalizedConcept]] = set()
        for res in resolutions:
            key = (res.section_id, res.concept)
            if key in seen:
                raise ValidationError(
                    f"duplicate resolution for '{res.concept.value}' in {res.section_id}"
                )
            seen.add(key)
            case = cases.get(key)
            if case is None:
                raise NotADisagreementError(
                    f"'{res.concept.value}' in {res.section_id} is not a current "
                    f"disagreement case of round '{round_id}'"
                )
            span = None
            if res.outcome is ResolutionOutcome.PROMOTE:
                section = self._round_section(r, res.section_id)
                span = self._promotion_span(r, section, res)
                for missing in sorted(set(r.participants) - set(case.tagged_by)):
                    new_annotations.append(
                        make_annotation(
                            section, missing, span, AnnotationPhase.POST_DISCUSSION, r.id
                        )
                    )
            records.append(
                ResolutionRecord(
                    round_id=r.id,
                    section_id=res.section_id,
                    concept=res.concept,
                    outcome=res.outcome,
                    span=span,
                    rule_suggestions=res.rule_suggestions,
                )
            )
        r.record_submission(RoundPhase.DISCUSSION, actor_id)
        self.annotations.extend(new_annotations)
        self.resolution_log.extend(records)
        return r

    def close_round(
        self, round_id: str, actor_id: str, changes: Sequence[CodebookChange] = ()
    ) -> Round:
        """Codebook-update submission; an empty change list is explicitly legal."""
        r = self.round(round_id)
        r.require_phase(RoundPhase.CODEBOOK_UPDATE)
        # dry-run the whole payload on a copy so a bad change list leaves
        # both the codebook and the round untouched
        staged = copy.deepcopy(self.codebook)
        apply_changes(staged, changes, round_index=r.index)
        r.record_submission(RoundPhase.CODEBOOK_UPDATE, actor_id)
        self.codebook = staged
        return r

    def _promotion_span(self, r: Round, section: Section, res: Resolution) -> Span:
        if res.span is not None:
            surface = extract_surface(section, res.span)
            if normalize(surface) != res.concept:
                raise LocateMismatchError(
                    f"promotion span [{res.span.start}, {res.span.end}) reads "
                    f"'{surface}', which does not normalize to '{res.concept.value}'"
                )
            return res.span
        # auto-fill: adopt the first tagger's span for the case, falling back
        # to a unique occurrence in the body
        existing = sorted(
            (
                a.span
                for a in self.annotations
                if a.round_id == r.id
                and a.section_id == section.id
                and a.concept == res.concept
            ),
            key=lambda s: (s.start, s.end),
        )
        if existing:
            return existing[0]
        occurrences = find_occurrences(section, res.concept)
        if len(occurrences) == 1:
            return occurrences[0]
        raise ValidationError(
            f"cannot auto-locate '{res.concept.value}' in {section.id}; "
            "pass an explicit span"
        )

    # -- reports ----------------------------------------------------------

    def agreement_report(self, round_id: str, label: PhaseLabel) -> AgreementReport:
        r = self.round(round_id)
        self._require_complete(r, label)
        phases = BEFORE_PHASES if label is PhaseLabel.BEFORE_DISCUSSION else AFTER_PHASES
        per_section = self._annotation_sets(
            r, phases, exclude_dropped=label is PhaseLabel.AFTER_DISCUSSION
        )
        return agreement.round_report(r.id, label, per_section, list(r.participants))

    def consensus_concepts(self, r: Round, label: PhaseLabel) -> list[NormalizedConcept]:
        """Per-section consensus lists concatenated in section order."""
        phases = BEFORE_PHASES if label is PhaseLabel.BEFORE_DISCUSSION else AFTER_PHASES
        per_section = self._annotation_sets(
            r, phases, exclude_dropped=label is PhaseLabel.AFTER_DISCUSSION
        )
        out: list[NormalizedConcept] = []
        for _section_id, sets in per_section:
            if not sets:
                continue
            consensus = set.intersection(*(set(s) for s in sets.values()))
            out.extend(sorted(consensus, key=lambda c: c.value))
        return out

    def stats_table(
        self, round_indices: Sequence[int] | None = None
    ) -> stats.CorpusStatsTable:
        """Build the four-column n-gram table over closed rounds."""
        closed = [
            self.rounds[rid]
            for rid in self.round_order
            if self.rounds[rid].phase is RoundPhase.CLOSED
        ]
        if round_indices is not None:
            wanted = set(round_indices)
            closed = [r for r in closed if r.index in wanted]
        if not closed:
            raise EmptyRangeError("no closed rounds in the requested range")
        before: list[NormalizedConcept] = []
        after: list[NormalizedConcept] = []
        for r in closed:
            before.extend(self.consensus_concepts(r, PhaseLabel.BEFORE_DISCUSSION))
            after.extend(self.consensus_concepts(r, PhaseLabel.AFTER_DISCUSSION))
        return stats.build_stats_table(before, after)

    # -- integrity --------------------------------------------------------

    def validate(self) -> list[str]:
        """Full-scan referential and invariant check; returns violations."""
        problems: list[str] = []
        section_ids = {sid for b in self.textbooks.values() for sid in b.section_ids()}
        chapter_ids = {c.id for b in self.textbooks.values() for c in b.chapters}
        for book in self.textbooks.values():
            ids = [c.id for c in book.chapters]
            if len(ids) != len(set(ids)):
                problems.append(f"textbook '{book.id}' has duplicate chapter ids")
            for chapter in book.chapters:
                sids = [s.id for s in chapter.sections]
                if len(sids) != len(set(sids)):
                    problems.append(f"chapter '{chapter.id}' has duplicate section ids")
                for section in chapter.sections:
                    if not section.body:
                        problems.append(f"section '{section.id}' has an empty body")
                    if section.char_count != len(section.body):
                        problems.append(f"section '{section.id}' char_count is stale")
        for r in self.rounds.values():
            if r.chapter_id not in chapter_ids:
                problems.append(f"round '{r.id}' references missing chapter '{r.chapter_id}'")
            for a in r.participants:
                if a not in self.annotators:
                    problems.append(f"round '{r.id}' participant '{a}' does not exist")
                elif not self.annotators[a].qualified:
                    problems.append(f"round '{r.id}' participant '{a}' is not qualified")
            for phase, ids in r.submitted.items():
                stray = set(ids) - set(r.participants)
                if stray:
                    problems.append(
                        f"round '{r.id}' phase '{phase}' has non-participant "
                        f"submissions: {sorted(stray)}"
                    )
        round_ids = set(self.rounds)
        for i, ann in enumerate(self.annotations):
            where = f"annotation #{i} ({ann.annotator_id}, {ann.section_id})"
            if ann.section_id not in section_ids:
                problems.append(f"{where}: missing section")
                continue
            if ann.annotator_id not in self.annotators:
                problems.append(f"{where}: missing annotator")
            elif not self.annotators[ann.annotator_id].qualified:
                problems.append(f"{where}: annotator not qualified")
            if ann.round_id not in round_ids:
                problems.append(f"{where}: missing round '{ann.round_id}'")
            section = self.section(ann.section_id)
            try:
                surface = extract_surface(section, ann.span)
            except Exception as exc:
                problems.append(f"{where}: {exc}")
                continue
            if surface != ann.surface:
                problems.append(f"{where}: stored surface does not match the body text")
            elif normalize(surface) != ann.concept:
                problems.append(f"{where}: concept does not match normalize(surface)")
        keys = [
            (a.round_id, a.annotator_id, a.section_id, a.concept.value,
             a.span.start, a.span.end)
            for a in self.annotations
        ]
        if len(keys) != len(set(keys)):
            problems.append("duplicate annotations present")
        for rule in self.codebook.rules:
            rounds_seen = [i for i, _ in rule.amendments]
            if rounds_seen != sorted(set(rounds_seen)):
                problems.append(f"rule '{rule.id}' has non-increasing amendment rounds")
            if rule.round_introduced > 0:
                r = next(
                    (x for x in self.rounds.values() if x.index == rule.round_introduced),
                    None,
                )
                if r is None or r.phase is not RoundPhase.CLOSED:
                    problems.append(
                        f"rule '{rule.id}' is not attributable to a closed round"
                    )
        return problems

    # -- internals --------------------------------------------------------

    def _round_section(self, r: Round, section_id: str) -> Section:
        section = self.section(section_id)
        if section.id not in {s.id for s in self.chapter_sections(r.chapter_id)}:
            raise ValidationError(
                f"section '{section_id}' is not part of round '{r.id}' "
                f"chapter '{r.chapter_id}'"
            )
        return section

    def _reject_duplicates(
        self, round_id: str, batch: Sequence[ConceptAnnotation]
    ) -> None:
        # within one round: same annotator, section, concept, and span is a
        # duplicate; the same concept at a different span is a distinct
        # occurrence.  Later rounds re-annotate chapters from scratch.
        existing = {
            (a.annotator_id, a.section_id, a.concept, a.span)
            for a in self.annotations
            if a.round_id == round_id
        }
        for ann in batch:
            key = (ann.annotator_id, ann.section_id, ann.concept, ann.span)
            if key in existing:
                raise ConflictError(
                    f"duplicate annotation of '{ann.concept.value}' at "
                    f"{ann.section_id}[{ann.span.start}:{ann.span.end}]"
                )
            existing.add(key)

    def _annotation_sets(
        self,
        r: Round,
        phases: tuple[AnnotationPhase, ...],
        exclude_dropped: bool = False,
    ) -> list[tuple[str, dict[str, set[NormalizedConcept]]]]:
        """Ordered per-section, per-annotator concept sets for one round."""
        sections = self.chapter_sections(r.chapter_id)
        sets: dict[str, dict[str, set[NormalizedConcept]]] = {
            s.id: {a: set() for a in r.participants} for s in sections
        }
        for ann in self.annotations:
            if ann.round_id == r.id and ann.phase in phases:
                sets[ann.section_id][ann.annotator_id].add(ann.concept)
        if exclude_dropped:
            for rec in self.resolution_log:
                if rec.round_id == r.id and rec.outcome is ResolutionOutcome.DROP:
                    for per_annotator in (sets.get(rec.section_id) or {}).values():
                        per_annotator.discard(rec.concept)
        return [(s.id, sets[s.id]) for s in sections]

    def _require_complete(self, r: Round, label: PhaseLabel) -> None:
        needed = [RoundPhase.ANNOTATING, RoundPhase.MISSED_REVIEW]
        if label is PhaseLabel.AFTER_DISCUSSION:
            needed.append(RoundPhase.DISCUSSION)
        for phase in needed:
            expected = (
                [r.lead_id]
                if phase in (RoundPhase.DISCUSSION, RoundPhase.CODEBOOK_UPDATE)
                else r.participants
            )
            for annotator_id in expected:
                if not r.has_submitted(phase, annotator_id):
                    raise IncompleteDataError(
                        f"round '{r.id}': '{annotator_id}' has not submitted "
                        f"the {phase.value} phase"
                    )
