"""HTTP interface over a workbench.

Every route is a thin adapter: parse the payload, resolve the acting
annotator from the bearer token, call the store, shape the response.  All
protocol rules live in the store; the server adds only authentication and
the error-to-status mapping.

Auth model: one admin token (full access, may act on behalf of any
annotator by naming them) plus one bearer token per annotator, issued at
registration.  Submissions default to the token's own identity.
"""
from __future__ import annotations

import threading
from typing import Any, Callable

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.security.utils import get_authorization_scheme_param
import pydantic
from pydantic import BaseModel, Field

from . import serialize
from .agreement import PhaseLabel, report_to_dict
from .codebook import CodebookChange, codebook_to_dict
from .corpus import IngestConfig, Span, normalize
from .db import Database
from .errors import (
    AuthorizationError,
    ConflictError,
    DomainError,
    EmptyRangeError,
    IncompleteDataError,
    NotFoundError,
    PhaseError,
    ValidationError,
)
from .protocol import Round, RoundPhase
from .review import Resolution, ResolutionOutcome, ReviewDecision, ReviewVerdict
from .stats import table_to_dict
from .store import Workbench

_STATUS: list[tuple[type, int]] = [
    (PhaseError, 409),
    (ConflictError, 409),
    (AuthorizationError, 403),
    (NotFoundError, 404),
    (EmptyRangeError, 404),
    (IncompleteDataError, 409),
    (DomainError, 422),
]


def _status_for(exc: DomainError) -> int:
    for cls, status in _STATUS:
        if isinstance(exc, cls):
            return status
    return 422


def _error_body(kind: str, message: str) -> dict:
    return {"error": {"type": kind, "message": message}}


class _Identity:
    """Resolved caller: the admin, or one annotator."""

    def __init__(self, annotator_id: str | None, is_admin: bool):
        self.annotator_id = annotator_id
        self.is_admin = is_admin

    def require_admin(self) -> None:
        if not self.is_admin:
            raise AuthorizationError("this operation requires the admin token")

    def acting_as(self, requested: str | None) -> str:
        """The annotator the call acts for; admins must name one explicitly."""
        if self.is_admin:
            if not requested:
                raise ValidationError(
                    "admin submissions must name the annotator they act for"
                )
            return requested
        assert self.annotator_id is not None
        if requested and requested != self.annotator_id:
            raise AuthorizationError(
                f"token belongs to '{self.annotator_id}', cannot act as '{requested}'"
            )
        return self.annotator_id


class SpanPayload(BaseModel):
    section_id: str
    start: int
    end: int


class AnnotationsPayload(BaseModel):
    annotations: list[SpanPayload]
    annotator_id: str | None = None
    round_version: int | None = None


class DecisionPayload(BaseModel):
    section_id: str
    concept: str
    verdict: str
    start: int | None = None
    end: int | None = None
    rationale: str = ""


class ReviewPayload(BaseModel):
    decisions: list[DecisionPayload]
    annotator_id: str | None = None
    round_version: int | None = None


class ResolutionPayload(BaseModel):
    section_id: str
    concept: str
    outcome: str
    start: int | None = None
    end: int | None = None
    rule_suggestions: list[str] = Field(default_factory=list)


class ResolutionsPayload(BaseModel):
    resolutions: list[ResolutionPayload]
    annotator_id: str | None = None
    round_version: int | None = None


class ChangePayload(BaseModel):
    action: str
    text: str
    examples: list[list[str]] = Field(default_factory=list)
    rule_id: str | None = None


class ClosePayload(BaseModel):
    changes: list[ChangePayload] = Field(default_factory=list)
    annotator_id: str | None = None
    round_version: int | None = None


class TextbookPayload(BaseModel):
    text: str
    textbook_id: str = "book"
    title: str = ""
    min_section_chars: int | None = None


class AnnotatorPayload(BaseModel):
    id: str
    display_name: str = ""


class QualificationPayload(BaseModel):
    gold_section_id: str
    concepts: list[str]
    threshold: float | None = None


class QualifyPayload(BaseModel):
    concepts: list[str]
    annotator_id: str | None = None


class RoundPayload(BaseModel):
    chapter_id: str
    participants: list[str] | None = None
    lead_id: str | None = None


def round_view(r: Round) -> dict:
    return {
        "id": r.id,
        "index": r.index,
        "chapter_id": r.chapter_id,
        "participants": list(r.participants),
        "lead_id": r.lead_id,
        "phase": r.phase.value,
        "submitted": {k: list(v) for k, v in sorted(r.submitted.items())},
        "version": r.version,
    }


def _parse_decision(p: DecisionPayload) -> ReviewDecision:
    try:
        verdict = ReviewVerdict(p.verdict)
    except ValueError:
        raise ValidationError(f"unknown verdict '{p.verdict}'") from None
    span = None
    if p.start is not None or p.end is not None:
        if p.start is None or p.end is None:
            raise ValidationError("span needs both start and end")
        span = Span(start=p.start, end=p.end)
    return ReviewDecision(
        section_id=p.section_id,
        concept=normalize(p.concept),
        verdict=verdict,
        span=span,
        rationale=p.rationale,
    )


def _parse_resolution(p: ResolutionPayload) -> Resolution:
    try:
        outcome = ResolutionOutcome(p.outcome)
    except ValueError:
        raise ValidationError(f"unknown outcome '{p.outcome}'") from None
    span = None
    if p.start is not None or p.end is not None:
        if p.start is None or p.end is None:
            raise ValidationError("span needs both start and end")
        span = Span(start=p.start, end=p.end)
    return Resolution(
        section_id=p.section_id,
        concept=normalize(p.concept),
        outcome=outcome,
        span=span,
        rule_suggestions=tuple(p.rule_suggestions),
    )


def _check_version(r: Round, expected: int | None) -> None:
    # optimistic concurrency: a stale client sees 409 instead of silently
    # stacking its submission onto a state it has not seen
    if expected is not None and expected != r.version:
        raise ConflictError(
            f"round '{r.id}' is at version {r.version}, you submitted "
            f"against {expected}"
        )


def create_app(
    bench: Workbench,
    admin_token: str,
    database: Database | None = None,
) -> FastAPI:
    if not admin_token:
        raise ValidationError("admin_token must be non-empty")
    app = FastAPI(title="concept annotation workbench", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    def persist() -> None:
        if database is not None:
            database.save(bench)

    def identity(request: Request) -> _Identity:
        header = request.headers.get("Authorization", "")
        scheme, token = get_authorization_scheme_param(header)
        if scheme.lower() != "bearer" or not token:
            raise AuthorizationError("missing bearer token")
        if token == admin_token:
            return _Identity(annotator_id=None, is_admin=True)
        annotator_id = bench.annotator_for_token(token)
        if annotator_id is None:
            raise AuthorizationError("unrecognized token")
        return _Identity(annotator_id=annotator_id, is_admin=False)

    @app.exception_handler(DomainError)
    async def domain_error_handler(request: Request, exc: DomainError):
        return JSONResponse(
            status_code=_status_for(exc),
            content=_error_body(type(exc).__name__, str(exc)),
        )

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content=_error_body("ValidationError", str(exc.errors())),
        )

    def mutate(fn: Callable[[], Any]) -> Any:
        with lock:
            result = fn()
            persist()
            return result

    # -- health and corpus ------------------------------------------------

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/textbooks", status_code=201)
    def create_textbook(payload: TextbookPayload, who: _Identity = Depends(identity)):
        who.require_admin()
        config = IngestConfig(
            textbook_id=payload.textbook_id,
            title=payload.title,
            min_section_chars=(
                payload.min_section_chars
                if payload.min_section_chars is not None
                else bench.config.min_section_chars
            ),
        )
        book = mutate(lambda: bench.ingest(payload.text, config))
        return {
            "id": book.id,
            "title": book.title,
            "chapters": [
                {"id": c.id, "index": c.index, "title": c.title,
                 "sections": [s.id for s in c.sections]}
                for c in book.chapters
            ],
        }

    @app.get("/textbooks/{textbook_id}")
    def get_textbook(textbook_id: str, who: _Identity = Depends(identity)):
        book = bench.textbooks.get(textbook_id)
        if book is None:
            raise NotFoundError(f"no textbook '{textbook_id}'")
        return {
            "id": book.id,
            "title": book.title,
            "chapters": [
                {
                    "id": c.id,
                    "index": c.index,
                    "title": c.title,
                    "sections": [
                        {
                            "id": s.id,
                            "heading": s.heading,
                            "body": s.body,
                            "char_count": s.char_count,
                        }
                        for s in c.sections
                    ],
                }
                for c in book.chapters
            ],
        }

    # -- annotators and qualification -------------------------------------

    @app.post("/annotators", status_code=201)
    def add_annotator(payload: AnnotatorPayload, who: _Identity = Depends(identity)):
        who.require_admin()
        annotator, token = mutate(
            lambda: bench.add_annotator(payload.id, payload.display_name)
        )
        return {
            "id": annotator.id,
            "display_name": annotator.display_name,
            "token": token,
        }

    @app.get("/annotators")
    def list_annotators(who: _Identity = Depends(identity)):
        return [
            {
                "id": a.id,
                "display_name": a.display_name,
                "qualified": a.qualified,
                "qualification_score": a.qualification_score,
            }
            for a in sorted(bench.annotators.values(), key=lambda a: a.id)
        ]

    @app.post("/qualification", status_code=201)
    def set_qualification(
        payload: QualificationPayload, who: _Identity = Depends(identity)
    ):
        who.require_admin()
        test = mutate(
            lambda: bench.set_qualification_test(
                payload.gold_section_id,
                [normalize(c) for c in payload.concepts],
                payload.threshold,
            )
        )
        return {
            "gold_section_id": test.gold_section_id,
            "concept_count": len(test.gold_concepts),
            "threshold": test.threshold,
        }

    @app.get("/qualification")
    def get_qualification(who: _Identity = Depends(identity)):
        # candidates may look up where the test lives, never its answers
        test = bench.qualification_test
        if test is None:
            raise NotFoundError("no qualification test configured")
        return {"gold_section_id": test.gold_section_id, "threshold": test.threshold}

    @app.post("/annotators/{annotator_id}/qualify")
    def qualify(
        annotator_id: str, payload: QualifyPayload, who: _Identity = Depends(identity)
    ):
        target = who.acting_as(payload.annotator_id or annotator_id)
        if target != annotator_id:
            raise AuthorizationError(
                f"path names '{annotator_id}' but the call acts for '{target}'"
            )
        score, passed = mutate(
            lambda: bench.qualify(annotator_id, [normalize(c) for c in payload.concepts])
        )
        return {"annotator_id": annotator_id, "score": score, "passed": passed}

    # -- rounds -----------------------------------------------------------

    @app.post("/rounds", status_code=201)
    def create_round(payload: RoundPayload, who: _Identity = Depends(identity)):
        who.require_admin()
        r = mutate(
            lambda: bench.create_round(
                payload.chapter_id, payload.participants, payload.lead_id
            )
        )
        return round_view(r)

    @app.get("/rounds")
    def list_rounds(who: _Identity = Depends(identity)):
        return [round_view(bench.rounds[rid]) for rid in bench.round_order]

    @app.get("/rounds/{round_id}")
    def get_round(round_id: str, who: _Identity = Depends(identity)):
        return round_view(bench.round(round_id))

    def _submit_annotating(round_id: str, payload: AnnotationsPayload, who: _Identity):
        actor = who.acting_as(payload.annotator_id)

        def run():
            _check_version(bench.round(round_id), payload.round_version)
            spans = [
                (p.section_id, Span(start=p.start, end=p.end))
                for p in payload.annotations
            ]
            return bench.submit_annotations(round_id, actor, spans)

        return round_view(mutate(run))

    def _submit_review(round_id: str, payload: ReviewPayload, who: _Identity):
        actor = who.acting_as(payload.annotator_id)
        decisions = [_parse_decision(p) for p in payload.decisions]

        def run():
            _check_version(bench.round(round_id), payload.round_version)
            return bench.submit_review(round_id, actor, decisions)

        return round_view(mutate(run))

    def _submit_discussion(round_id: str, payload: ResolutionsPayload, who: _Identity):
        actor = who.acting_as(payload.annotator_id)
        resolutions = [_parse_resolution(p) for p in payload.resolutions]

        def run():
            _check_version(bench.round(round_id), payload.round_version)
            return bench.submit_resolutions(round_id, actor, resolutions)

        return round_view(mutate(run))

    def _submit_close(round_id: str, payload: ClosePayload, who: _Identity):
        actor = who.acting_as(payload.annotator_id)
        changes = [
            CodebookChange(
                action=p.action,
                text=p.text,
                examples=tuple(
                    (pair[0], pair[1]) if len(pair) == 2 else (pair[0], "")
                    for pair in p.examples
                ),
                rule_id=p.rule_id,
            )
            for p in payload.changes
        ]

        def run():
            _check_version(bench.round(round_id), payload.round_version)
            return bench.close_round(round_id, actor, changes)

        return round_view(mutate(run))

    async def parse_body(request: Request, model: type[BaseModel]) -> BaseModel:
        try:
            body = await request.json()
        except Exception as exc:
            raise ValidationError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        try:
            return model(**body)
        except pydantic.ValidationError as exc:
            raise ValidationError(str(exc)) from exc

    @app.post("/rounds/{round_id}/submit/{phase}")
    async def submit_phase(
        round_id: str, phase: str, request: Request, who: _Identity = Depends(identity)
    ):
        try:
            target = RoundPhase(phase)
        except ValueError:
            raise NotFoundError(f"no phase '{phase}'") from None
        if target is RoundPhase.ANNOTATING:
            payload = await parse_body(request, AnnotationsPayload)
            return _submit_annotating(round_id, payload, who)
        if target is RoundPhase.MISSED_REVIEW:
            payload = await parse_body(request, ReviewPayload)
            return _submit_review(round_id, payload, who)
        if target is RoundPhase.DISCUSSION:
            payload = await parse_body(request, ResolutionsPayload)
            return _submit_discussion(round_id, payload, who)
        if target is RoundPhase.CODEBOOK_UPDATE:
            payload = await parse_body(request, ClosePayload)
            return _submit_close(round_id, payload, who)
        raise PhaseError(f"phase '{phase}' does not accept submissions")

    @app.get("/rounds/{round_id}/review/{annotator_id}")
    def get_review_candidates(
        round_id: str, annotator_id: str, who: _Identity = Depends(identity)
    ):
        who.acting_as(annotator_id)
        candidates = bench.review_candidates(round_id, annotator_id)
        return [
            {
                "section_id": c.section_id,
                "concept": c.concept.value,
                "gram_length": c.concept.gram_length,
                "tagged_by": list(c.tagged_by),
            }
            for c in candidates
        ]

    @app.post("/rounds/{round_id}/review/{annotator_id}")
    def post_review(
        round_id: str,
        annotator_id: str,
        payload: ReviewPayload,
        who: _Identity = Depends(identity),
    ):
        if payload.annotator_id and payload.annotator_id != annotator_id:
            raise ValidationError("payload annotator_id contradicts the path")
        payload.annotator_id = annotator_id
        return _submit_review(round_id, payload, who)

    @app.get("/rounds/{round_id}/disagreements")
    def get_disagreements(round_id: str, who: _Identity = Depends(identity)):
        cases = bench.disagreements(round_id)
        return [
            {
                "section_id": c.section_id,
                "concept": c.concept.value,
                "gram_length": c.concept.gram_length,
                "tagged_by": list(c.tagged_by),
                "support": c.support,
            }
            for c in cases
        ]

    @app.post("/rounds/{round_id}/resolutions")
    def post_resolutions(
        round_id: str, payload: ResolutionsPayload, who: _Identity = Depends(identity)
    ):
        return _submit_discussion(round_id, payload, who)

    @app.post("/rounds/{round_id}/close")
    def post_close(
        round_id: str, payload: ClosePayload, who: _Identity = Depends(identity)
    ):
        return _submit_close(round_id, payload, who)

    @app.get("/rounds/{round_id}/agreement")
    def get_agreement(
        round_id: str,
        phase: str = Query(default=PhaseLabel.AFTER_DISCUSSION.value),
        who: _Identity = Depends(identity),
    ):
        try:
            label = PhaseLabel(phase)
        except ValueError:
            raise ValidationError(
                f"phase must be one of {[p.value for p in PhaseLabel]}, got '{phase}'"
            ) from None
        return report_to_dict(bench.agreement_report(round_id, label))

    # -- codebook and statistics ------------------------------------------

    @app.get("/codebook")
    def get_codebook(
        as_of_round: int | None = None, who: _Identity = Depends(identity)
    ):
        rules = codebook_to_dict(bench.codebook)
        if as_of_round is not None:
            version = bench.codebook.version_at(as_of_round)
            ids = {rule_id for rule_id, _ in version.rules}
            effective = dict(version.rules)
            rules = [
                {**r, "text": effective[r["id"]]} for r in rules if r["id"] in ids
            ]
        return {"rules": rules}

    @app.get("/codebook/convergence")
    def get_convergence(who: _Identity = Depends(identity)):
        closed = [
            bench.rounds[rid].index
            for rid in bench.round_order
            if bench.rounds[rid].phase is RoundPhase.CLOSED
        ]
        if not closed:
            raise EmptyRangeError("no closed rounds yet")
        report = bench.codebook.convergence_report(closed)
        return {
            "additions": [list(pair) for pair in report.additions],
            "converged_at": report.converged_at,
        }

    @app.get("/stats/table")
    def get_stats(
        rounds: str | None = None, who: _Identity = Depends(identity)
    ):
        indices = None
        if rounds:
            try:
                indices = [int(x) for x in rounds.split(",") if x.strip()]
            except ValueError:
                raise ValidationError(
                    f"rounds must be comma-separated integers, got '{rounds}'"
                ) from None
        return table_to_dict(bench.stats_table(indices))

    # -- interchange ------------------------------------------------------

    @app.get("/export")
    def export(
        include_text: bool = True,
        phase: str = PhaseLabel.AFTER_DISCUSSION.value,
        who: _Identity = Depends(identity),
    ):
        if include_text:
            doc = serialize.to_document(bench)
        else:
            try:
                label = PhaseLabel(phase)
            except ValueError:
                raise ValidationError(f"unknown phase '{phase}'") from None
            doc = serialize.concepts_document(bench, label)
        return Response(
            content=serialize.canonical_json(doc), media_type="application/json"
        )

    @app.post("/import")
    async def import_document(request: Request, who: _Identity = Depends(identity)):
        who.require_admin()
        try:
            doc = await request.json()
        except Exception as exc:
            raise ValidationError(f"request body is not valid JSON: {exc}") from exc

        def run():
            restored = serialize.from_document(doc)
            bench.config = restored.config
            bench.textbooks = restored.textbooks
            bench.annotators = restored.annotators
            bench.tokens = restored.tokens or bench.tokens
            bench.qualification_test = restored.qualification_test
            bench.rounds = restored.rounds
            bench.round_order = restored.round_order
            bench.annotations = restored.annotations
            bench.review_log = restored.review_log
            bench.resolution_log = restored.resolution_log
            bench.codebook = restored.codebook
            return restored

        mutate(run)
        return {
            "textbooks": len(bench.textbooks),
            "annotators": len(bench.annotators),
            "rounds": len(bench.rounds),
            "annotations": len(bench.annotations),
        }

    @app.get("/validate")
    def validate(who: _Identity = Depends(identity)):
        problems = bench.validate()
        return {"ok": not problems, "problems": problems}

    return app
