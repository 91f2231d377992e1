"""Command-line interface.

Conventions: machine-readable results go to stdout, progress and
diagnostics to stderr.  Exit status 0 on success, 1 for any domain
failure, 2 for usage errors.  State lives in the sqlite file named by
--db, the config file, or ./ska.db.
"""
from __future__ import annotations

import csv
import json
import os
import secrets
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import review as review_mod
from . import serialize
from .agreement import PhaseLabel, report_csv, report_to_dict
from .codebook import CodebookChange, codebook_markdown, codebook_to_dict
from .config import WorkbenchConfig, load_config
from .corpus import IngestConfig, Span, normalize
from .db import Database
from .errors import DomainError, ValidationError
from .protocol import RoundPhase
from .review import Resolution, ResolutionOutcome, ReviewDecision, ReviewVerdict
from .stats import table_csv, table_text, table_to_dict
from .store import Workbench


@dataclass
class AppState:
    config: WorkbenchConfig
    db_path: str

    def database(self) -> Database:
        return Database(self.db_path)

    def load(self) -> tuple[Database, Workbench]:
        database = self.database()
        bench = database.load()
        if bench is None:
            bench = Workbench(config=self.config)
        return database, bench


def _emit(doc) -> None:
    click.echo(json.dumps(doc, sort_keys=True, ensure_ascii=False))


def _note(message: str) -> None:
    click.echo(message, err=True)


def _read_concepts(path: str) -> list:
    concepts = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            concepts.append(normalize(line))
    return concepts


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc


def _read_spans(path: str) -> list[tuple[str, Span]]:
    """Annotation submissions: JSON list of objects, or CSV with a
    section_id,start,end header."""
    if path.endswith(".csv"):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = _read_json(path)
        if not isinstance(rows, list):
            raise ValidationError(f"{path}: expected a JSON list")
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(
                (row["section_id"], Span(start=int(row["start"]), end=int(row["end"])))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: row {i}: {exc!r}") from exc
    return out


def _read_decisions(path: str) -> list[ReviewDecision]:
    rows = _read_json(path)
    if not isinstance(rows, list):
        raise ValidationError(f"{path}: expected a JSON list")
    out = []
    for i, row in enumerate(rows):
        try:
            span = None
            if row.get("start") is not None or row.get("end") is not None:
                span = Span(start=int(row["start"]), end=int(row["end"]))
            out.append(
                ReviewDecision(
                    section_id=row["section_id"],
                    concept=normalize(row["concept"]),
                    verdict=ReviewVerdict(row["verdict"]),
                    span=span,
                    rationale=row.get("rationale", ""),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: row {i}: {exc!r}") from exc
    return out


def _read_resolutions(path: str) -> list[Resolution]:
    rows = _read_json(path)
    if not isinstance(rows, list):
        raise ValidationError(f"{path}: expected a JSON list")
    out = []
    for i, row in enumerate(rows):
        try:
            span = None
            if row.get("start") is not None or row.get("end") is not None:
                span = Span(start=int(row["start"]), end=int(row["end"]))
            out.append(
                Resolution(
                    section_id=row["section_id"],
                    concept=normalize(row["concept"]),
                    outcome=ResolutionOutcome(row["outcome"]),
                    span=span,
                    rule_suggestions=tuple(row.get("rule_suggestions", ())),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: row {i}: {exc!r}") from exc
    return out


def _read_changes(path: str) -> list[CodebookChange]:
    rows = _read_json(path)
    if not isinstance(rows, list):
        raise ValidationError(f"{path}: expected a JSON list")
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(
                CodebookChange(
                    action=row["action"],
                    text=row["text"],
                    examples=tuple(
                        (pair[0], pair[1] if len(pair) > 1 else "")
                        for pair in row.get("examples", ())
                    ),
                    rule_id=row.get("rule_id"),
                )
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"{path}: row {i}: {exc!r}") from exc
    return out


def _round_view(r) -> dict:
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


@click.group()
@click.option(
    "--db", "db_path", default=None, metavar="PATH",
    help="sqlite state file (default: config value or ./ska.db)",
)
@click.option(
    "--config", "config_path", default=None, metavar="PATH",
    help="TOML config file (default: ./ska.toml when present)",
)
@click.pass_context
def cli(ctx: click.Context, db_path: str | None, config_path: str | None):
    """Collaborative concept-annotation workbench."""
    config = load_config(config_path)
    ctx.obj = AppState(config=config, db_path=db_path or config.database)


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--textbook-id", default="book", show_default=True)
@click.option("--title", default="")
@click.option("--min-section-chars", default=None, type=int,
              help="sections shorter than this merge into the next one")
@click.pass_obj
def ingest(state: AppState, source: str, textbook_id: str, title: str,
           min_section_chars: int | None):
    """Parse a sectioned text file into the corpus."""
    database, bench = state.load()
    config = IngestConfig(
        textbook_id=textbook_id,
        title=title,
        min_section_chars=(
            min_section_chars if min_section_chars is not None
            else bench.config.min_section_chars
        ),
    )
    book = bench.ingest(Path(source).read_text(encoding="utf-8"), config)
    database.save(bench)
    sections = sum(len(c.sections) for c in book.chapters)
    _note(f"ingested '{book.id}': {len(book.chapters)} chapters, {sections} sections")
    _emit({
        "id": book.id,
        "chapters": [
            {"id": c.id, "title": c.title, "sections": [s.id for s in c.sections]}
            for c in book.chapters
        ],
    })


@cli.group()
def annotator():
    """Manage annotators."""


@annotator.command("add")
@click.argument("annotator_id")
@click.option("--display-name", default="")
@click.pass_obj
def annotator_add(state: AppState, annotator_id: str, display_name: str):
    """Register an annotator and print their access token (shown once)."""
    database, bench = state.load()
    created, token = bench.add_annotator(annotator_id, display_name)
    database.save(bench)
    _note(f"registered '{created.id}'")
    _emit({"id": created.id, "display_name": created.display_name, "token": token})


@cli.group()
def qualify():
    """Qualification test management and scoring."""


@qualify.command("set")
@click.argument("gold_section_id")
@click.argument("concepts_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=None, type=float)
@click.pass_obj
def qualify_set(state: AppState, gold_section_id: str, concepts_file: str,
                threshold: float | None):
    """Install the gold concept list for the qualification section."""
    database, bench = state.load()
    test = bench.set_qualification_test(
        gold_section_id, _read_concepts(concepts_file), threshold
    )
    database.save(bench)
    _emit({
        "gold_section_id": test.gold_section_id,
        "concept_count": len(test.gold_concepts),
        "threshold": test.threshold,
    })


@qualify.command("run")
@click.argument("annotator_id")
@click.argument("concepts_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def qualify_run(state: AppState, annotator_id: str, concepts_file: str):
    """Score an annotator's practice list against the gold section."""
    database, bench = state.load()
    score, passed = bench.qualify(annotator_id, _read_concepts(concepts_file))
    database.save(bench)
    _note(f"'{annotator_id}' scored {score:.3f}: {'pass' if passed else 'fail'}")
    _emit({"annotator_id": annotator_id, "score": score, "passed": passed})


@cli.group(name="round")
def round_group():
    """Round lifecycle."""


@round_group.command("create")
@click.argument("chapter_id")
@click.option("--participants", default=None,
              help="comma-separated annotator ids (default: all qualified)")
@click.option("--lead", "lead_id", default=None)
@click.pass_obj
def round_create(state: AppState, chapter_id: str, participants: str | None,
                 lead_id: str | None):
    """Open an annotation round over one chapter."""
    database, bench = state.load()
    ids = [p.strip() for p in participants.split(",")] if participants else None
    r = bench.create_round(chapter_id, ids, lead_id)
    database.save(bench)
    _note(f"round '{r.id}' opened on '{chapter_id}', lead '{r.lead_id}'")
    _emit(_round_view(r))


@round_group.command("status")
@click.argument("round_id", required=False)
@click.pass_obj
def round_status(state: AppState, round_id: str | None):
    """Show one round, or all rounds when no id is given."""
    _database, bench = state.load()
    if round_id is None:
        _emit([_round_view(bench.rounds[rid]) for rid in bench.round_order])
    else:
        _emit(_round_view(bench.round(round_id)))


@round_group.command("close")
@click.argument("round_id")
@click.option("--actor", "actor_id", required=True,
              help="round lead filing the group submission")
@click.option("--changes", "changes_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="codebook change list (JSON); omit for no changes")
@click.pass_obj
def round_close(state: AppState, round_id: str, actor_id: str,
                changes_file: str | None):
    """File the codebook update and close the round."""
    database, bench = state.load()
    changes = _read_changes(changes_file) if changes_file else []
    r = bench.close_round(round_id, actor_id, changes)
    database.save(bench)
    _note(f"round '{round_id}' closed with {len(changes)} codebook changes")
    _emit(_round_view(r))


@cli.command()
@click.argument("round_id")
@click.argument("annotator_id")
@click.argument("spans_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def submit(state: AppState, round_id: str, annotator_id: str, spans_file: str):
    """Submit an annotator's span list for the annotating phase."""
    database, bench = state.load()
    spans = _read_spans(spans_file)
    r = bench.submit_annotations(round_id, annotator_id, spans)
    database.save(bench)
    _note(f"'{annotator_id}' submitted {len(spans)} annotations; "
          f"round phase is now '{r.phase.value}'")
    _emit(_round_view(r))


@cli.group(name="review")
def review_group():
    """Missed-concept review."""


@review_group.command("generate")
@click.argument("round_id")
@click.argument("annotator_id")
@click.option("-o", "out", default=None, type=click.Path(dir_okay=False),
              help="write CSV here instead of stdout")
@click.pass_obj
def review_generate(state: AppState, round_id: str, annotator_id: str,
                    out: str | None):
    """Emit the reviewer's missed-concept candidate file (CSV)."""
    _database, bench = state.load()
    candidates = bench.review_candidates(round_id, annotator_id)
    text = review_mod.candidates_csv(candidates)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        _note(f"wrote {len(candidates)} candidates to {out}")
    else:
        click.echo(text, nl=False)


@review_group.command("apply")
@click.argument("round_id")
@click.argument("annotator_id")
@click.argument("decisions_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def review_apply(state: AppState, round_id: str, annotator_id: str,
                 decisions_file: str):
    """Submit the reviewer's accept/reject decisions (JSON)."""
    database, bench = state.load()
    decisions = _read_decisions(decisions_file)
    r = bench.submit_review(round_id, annotator_id, decisions)
    database.save(bench)
    accepted = sum(1 for d in decisions if d.verdict is ReviewVerdict.ACCEPT)
    _note(f"'{annotator_id}' reviewed {len(decisions)} candidates "
          f"({accepted} accepted); round phase is now '{r.phase.value}'")
    _emit(_round_view(r))


@cli.command()
@click.argument("round_id")
@click.option("--actor", "actor_id", default=None,
              help="round lead filing the group submission")
@click.argument("resolutions_file", required=False,
                type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def resolve(state: AppState, round_id: str, actor_id: str | None,
            resolutions_file: str | None):
    """List disagreement cases, or file the group's resolutions (JSON).

    Without a file the current disagreement cases print to stdout; with a
    file --actor is required and the resolutions are submitted.
    """
    database, bench = state.load()
    if resolutions_file is None:
        cases = bench.disagreements(round_id)
        _emit([
            {
                "section_id": c.section_id,
                "concept": c.concept.value,
                "tagged_by": list(c.tagged_by),
                "support": c.support,
            }
            for c in cases
        ])
        return
    if actor_id is None:
        raise ValidationError("submitting resolutions requires --actor")
    resolutions = _read_resolutions(resolutions_file)
    r = bench.submit_resolutions(round_id, actor_id, resolutions)
    database.save(bench)
    _note(f"filed {len(resolutions)} resolutions; "
          f"round phase is now '{r.phase.value}'")
    _emit(_round_view(r))


@cli.command()
@click.argument("round_id")
@click.option("--phase", default=PhaseLabel.AFTER_DISCUSSION.value,
              type=click.Choice([p.value for p in PhaseLabel]),
              show_default=True)
@click.option("--format", "fmt", default="json",
              type=click.Choice(["json", "csv"]), show_default=True)
@click.pass_obj
def agreement(state: AppState, round_id: str, phase: str, fmt: str):
    """Inter-annotator agreement report for one round."""
    _database, bench = state.load()
    report = bench.agreement_report(round_id, PhaseLabel(phase))
    if fmt == "csv":
        click.echo(report_csv(report), nl=False)
    else:
        click.echo(json.dumps(report_to_dict(report), sort_keys=True,
                              ensure_ascii=False, indent=2))


@cli.command()
@click.option("--rounds", default=None,
              help="comma-separated round indices (default: every closed round)")
@click.option("--format", "fmt", default="text",
              type=click.Choice(["text", "csv", "json"]), show_default=True)
@click.pass_obj
def stats(state: AppState, rounds: str | None, fmt: str):
    """Concept length distribution over closed rounds."""
    _database, bench = state.load()
    indices = None
    if rounds:
        try:
            indices = [int(x) for x in rounds.split(",") if x.strip()]
        except ValueError:
            raise ValidationError(
                f"--rounds must be comma-separated integers, got '{rounds}'"
            ) from None
    table = bench.stats_table(indices)
    if fmt == "csv":
        click.echo(table_csv(table), nl=False)
    elif fmt == "json":
        click.echo(json.dumps(table_to_dict(table), sort_keys=True,
                              ensure_ascii=False, indent=2))
    else:
        click.echo(table_text(table))


@cli.group()
def codebook():
    """Codebook inspection and seeding."""


@codebook.command("show")
@click.option("--as-of-round", default=None, type=int,
              help="historic view: rules and text as of this round")
@click.option("--format", "fmt", default="md",
              type=click.Choice(["md", "json"]), show_default=True)
@click.pass_obj
def codebook_show(state: AppState, as_of_round: int | None, fmt: str):
    """Print the codebook with per-rule provenance."""
    _database, bench = state.load()
    if fmt == "json":
        rules = codebook_to_dict(bench.codebook)
        if as_of_round is not None:
            version = bench.codebook.version_at(as_of_round)
            effective = dict(version.rules)
            rules = [
                {**r, "text": effective[r["id"]]}
                for r in rules if r["id"] in effective
            ]
        closed = [bench.rounds[rid].index for rid in bench.round_order
                  if bench.rounds[rid].phase is RoundPhase.CLOSED]
        doc = {"rules": rules}
        if closed:
            report = bench.codebook.convergence_report(closed)
            doc["convergence"] = {
                "additions": [list(p) for p in report.additions],
                "converged_at": report.converged_at,
            }
        click.echo(json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2))
    else:
        click.echo(codebook_markdown(bench.codebook, as_of_round), nl=False)


@codebook.command("export")
@click.option("-o", "out", required=True, type=click.Path(dir_okay=False))
@click.option("--as-of-round", default=None, type=int)
@click.pass_obj
def codebook_export(state: AppState, out: str, as_of_round: int | None):
    """Write the codebook as a markdown file."""
    _database, bench = state.load()
    Path(out).write_text(codebook_markdown(bench.codebook, as_of_round),
                         encoding="utf-8")
    _note(f"wrote {len(bench.codebook.rules)} rules to {out}")


@codebook.command("seed")
@click.argument("changes_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def codebook_seed(state: AppState, changes_file: str):
    """Install seed rules before the first round closes."""
    database, bench = state.load()
    added = bench.seed_codebook(_read_changes(changes_file))
    database.save(bench)
    _note(f"seeded {added} rules")
    _emit({"rules": len(bench.codebook.rules), "added": added})


@cli.command()
@click.option("-o", "out", default=None, type=click.Path(dir_okay=False))
@click.option("--no-text", "include_text", flag_value=False, default=True,
              help="emit per-section concept lists without the source text")
@click.option("--phase", default=PhaseLabel.AFTER_DISCUSSION.value,
              type=click.Choice([p.value for p in PhaseLabel]),
              help="which consensus the text-free export reports")
@click.pass_obj
def export(state: AppState, out: str | None, include_text: bool, phase: str):
    """Write the canonical corpus document (JSON)."""
    _database, bench = state.load()
    if include_text:
        doc = serialize.to_document(bench)
    else:
        doc = serialize.concepts_document(bench, PhaseLabel(phase))
    text = serialize.canonical_json(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        _note(f"wrote {len(text)} bytes to {out}")
    else:
        click.echo(text, nl=False)


@cli.command(name="import")
@click.argument("document", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def import_cmd(state: AppState, document: str):
    """Replace the workbench state with an exported document."""
    database = state.database()
    bench = serialize.from_document(_read_json(document))
    database.save(bench)
    _note(f"imported {len(bench.annotations)} annotations, "
          f"{len(bench.rounds)} rounds")
    _emit({
        "textbooks": len(bench.textbooks),
        "annotators": len(bench.annotators),
        "rounds": len(bench.rounds),
        "annotations": len(bench.annotations),
    })


@cli.command()
@click.pass_context
def validate(ctx: click.Context):
    """Run the full-state integrity check; nonzero exit on violations."""
    _database, bench = ctx.obj.load()
    problems = bench.validate()
    _emit({"ok": not problems, "problems": problems})
    if problems:
        _note(f"{len(problems)} integrity violations")
        ctx.exit(1)
    _note("state is consistent")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--admin-token", default=None,
              help="admin bearer token (default: $SKA_ADMIN_TOKEN or generated)")
@click.pass_obj
def serve(state: AppState, host: str, port: int, admin_token: str | None):
    """Run the HTTP API over the state file."""
    import uvicorn

    from .server import create_app

    token = admin_token or os.environ.get("SKA_ADMIN_TOKEN")
    if not token:
        token = secrets.token_hex(16)
        _note(f"admin token (generated): {token}")
    database = state.database()
    bench = database.load()
    if bench is None:
        bench = Workbench(config=state.config)
        database.save(bench)
    app = create_app(bench, token, database)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        _note("aborted")
        return 1
    except DomainError as exc:
        _note(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
