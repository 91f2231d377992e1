"""Shared fixtures and seeded random-state builders.

Bodies are token grids (single-space-joined lowercase words) so every
token range has a computable span and its concept equals the joined
tokens.  Builders drive only legal operations, so any constructed state
is reachable through the public API.
"""
from __future__ import annotations

import random
from pathlib import Path

import pytest

from ska.codebook import CodebookChange
from ska.corpus import IngestConfig, Span, normalize
from ska.protocol import RoundPhase
from ska.review import Resolution, ResolutionOutcome, ReviewDecision, ReviewVerdict
from ska.store import Workbench

FIXTURES = Path(__file__).parent / "fixtures"

WORDS = [
    "index", "query", "ranking", "vector", "model", "term", "weight",
    "corpus", "token", "stem", "recall", "precision", "filter", "cluster",
    "graph", "node", "edge", "score", "match", "field", "probing", "hash",
    "merge", "posting", "list", "cache", "shard", "lexicon", "prefix",
    "entropy", "margin", "kernel", "feature", "label", "classifier", "boost",
]


def grid_body(rng: random.Random, n_tokens: int) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_tokens))


def token_span(body: str, i: int, j: int) -> Span:
    """Span of tokens [i, j) in a single-space token grid."""
    tokens = body.split(" ")
    start = sum(len(t) + 1 for t in tokens[:i])
    end = start + len(" ".join(tokens[i:j]))
    return Span(start, end)


def make_raw_book(
    rng: random.Random, n_chapters: int, sections_per_chapter: int, n_tokens: int = 30
) -> str:
    lines = []
    for c in range(1, n_chapters + 1):
        lines.append(f"# Chapter {c}")
        lines.append("")
        for s in range(1, sections_per_chapter + 1):
            lines.append(f"## Topic {c}.{s}")
            lines.append(grid_body(rng, n_tokens))
            lines.append("")
    return "\n".join(lines)


def random_tag_spans(
    rng: random.Random, body: str, max_tags: int
) -> list[Span]:
    """Distinct token-range spans, 1 to 3 tokens long."""
    tokens = body.split(" ")
    seen: set[tuple[int, int]] = set()
    spans = []
    for _ in range(rng.randint(1, max_tags)):
        length = rng.randint(1, 3)
        if len(tokens) <= length:
            continue
        i = rng.randrange(0, len(tokens) - length)
        if (i, i + length) in seen:
            continue
        seen.add((i, i + length))
        spans.append(token_span(body, i, i + length))
    return spans


def build_bench(
    rng: random.Random,
    n_chapters: int = 2,
    sections_per_chapter: int = 2,
    annotators: tuple[str, ...] = ("ann1", "ann2", "ann3"),
    n_tokens: int = 30,
) -> Workbench:
    """Corpus ingested, annotators registered and qualified, no rounds yet."""
    bench = Workbench()
    raw = make_raw_book(rng, n_chapters, sections_per_chapter, n_tokens)
    book = bench.ingest(raw, IngestConfig(textbook_id="tb", min_section_chars=1))
    for a in annotators:
        bench.add_annotator(a)
    gold_section = book.chapters[0].sections[0]
    gold = [normalize(t) for t in sorted(set(gold_section.body.split(" ")))[:4]]
    bench.set_qualification_test(gold_section.id, gold)
    for a in annotators:
        score, passed = bench.qualify(a, gold)
        assert passed, (a, score)
    return bench


def drive_round(
    bench: Workbench,
    rng: random.Random,
    chapter_id: str,
    stop_phase: RoundPhase | None = None,
    promote_all: bool = False,
    accept_probability: float = 0.5,
    max_tags: int = 6,
    codebook_additions: int | None = None,
):
    """Open a round on the chapter and run it forward with random legal
    submissions, leaving it in `stop_phase` (None = close it).  A stopped
    phase may hold partial submissions, chosen at random."""
    r = bench.create_round(chapter_id)
    sections = bench.chapter_sections(chapter_id)

    annotating = _shuffled(rng, r.participants)
    if stop_phase is RoundPhase.ANNOTATING:
        # strict subset, so the phase cannot complete and auto-advance
        annotating = annotating[: rng.randrange(0, len(annotating))]
    for a in annotating:
        spans = []
        for section in sections:
            spans.extend(
                (section.id, sp) for sp in random_tag_spans(rng, section.body, max_tags)
            )
        bench.submit_annotations(r.id, a, spans)
    if stop_phase is RoundPhase.ANNOTATING:
        return r

    reviewing = _shuffled(rng, r.participants)
    if stop_phase is RoundPhase.MISSED_REVIEW:
        reviewing = reviewing[: rng.randrange(0, len(reviewing))]
    for a in reviewing:
        decisions = []
        for c in bench.review_candidates(r.id, a):
            if rng.random() < accept_probability:
                # locate the concept through a peer's existing span
                span = _existing_span(bench, r.id, c.section_id, c.concept)
                decisions.append(
                    ReviewDecision(c.section_id, c.concept, ReviewVerdict.ACCEPT, span)
                )
            else:
                decisions.append(
                    ReviewDecision(
                        c.section_id, c.concept, ReviewVerdict.REJECT,
                        rationale="out of scope",
                    )
                )
        bench.submit_review(r.id, a, decisions)
    if stop_phase in (RoundPhase.MISSED_REVIEW, RoundPhase.DISCUSSION):
        return r

    resolutions = []
    for case in bench.disagreements(r.id):
        promote = promote_all or rng.random() < 0.5
        resolutions.append(
            Resolution(
                case.section_id,
                case.concept,
                ResolutionOutcome.PROMOTE if promote else ResolutionOutcome.DROP,
            )
        )
    bench.submit_resolutions(r.id, r.lead_id, resolutions)
    if stop_phase is RoundPhase.CODEBOOK_UPDATE:
        return r

    if codebook_additions is None:
        codebook_additions = rng.randint(0, 2)
    changes = [
        CodebookChange(action="add", text=f"Rule for round {r.index}, item {i + 1}.")
        for i in range(codebook_additions)
    ]
    bench.close_round(r.id, r.lead_id, changes)
    return r


def build_random_state(seed: int) -> Workbench:
    """A workbench at a random legal stage, deterministic per seed."""
    rng = random.Random(seed)
    n_chapters = rng.randint(1, 3)
    bench = build_bench(rng, n_chapters=n_chapters, sections_per_chapter=rng.randint(1, 2))
    chapter_ids = [c.id for b in bench.textbooks.values() for c in b.chapters]
    phases = [
        RoundPhase.ANNOTATING,
        RoundPhase.MISSED_REVIEW,
        RoundPhase.DISCUSSION,
        RoundPhase.CODEBOOK_UPDATE,
        None,
        None,  # closing twice as likely, to exercise stats and convergence
    ]
    for chapter_id in chapter_ids[: rng.randint(1, len(chapter_ids))]:
        drive_round(bench, rng, chapter_id, stop_phase=rng.choice(phases))
    return bench


def _shuffled(rng: random.Random, items) -> list:
    out = list(items)
    rng.shuffle(out)
    return out


def _existing_span(bench: Workbench, round_id: str, section_id: str, concept) -> Span:
    spans = sorted(
        (
            a.span
            for a in bench.annotations
            if a.round_id == round_id
            and a.section_id == section_id
            and a.concept == concept
        ),
        key=lambda s: (s.start, s.end),
    )
    assert spans, (section_id, concept)
    return spans[0]


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)


@pytest.fixture
def small_bench() -> Workbench:
    return build_bench(random.Random(7))
