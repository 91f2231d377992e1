"""End-to-end demo: two full annotation rounds over the sample book.

Runs entirely in process against an in-memory workbench and prints every
report the package produces. Deterministic; no files are written.

    python3 scripts/run_demo.py
"""
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from ska.agreement import PhaseLabel, report_to_dict
from ska.codebook import CodebookChange, codebook_markdown
from ska.corpus import IngestConfig, find_occurrences, normalize
from ska.review import Resolution, ResolutionOutcome, ReviewDecision, ReviewVerdict
from ska.review import candidates_csv
from ska.serialize import canonical_json, to_document
from ska.stats import table_text
from ska.store import Workbench


def banner(title: str) -> None:
    print()
    print(f"== {title} " + "=" * max(0, 66 - len(title)))


def span_of(bench: Workbench, section_id: str, phrase: str):
    """First occurrence of the phrase in the section, as (section_id, span)."""
    section = bench.section(section_id)
    spans = find_occurrences(section, normalize(phrase))
    if not spans:
        raise SystemExit(f"demo phrase {phrase!r} not found in {section_id}")
    return (section_id, spans[0])


def tag(bench, round_id, annotator, phrases_by_section):
    spans = [
        span_of(bench, section_id, phrase)
        for section_id, phrases in phrases_by_section.items()
        for phrase in phrases
    ]
    bench.submit_annotations(round_id, annotator, spans)


def accept(bench, section_id, phrase):
    section = bench.section(section_id)
    concept = normalize(phrase)
    return ReviewDecision(
        section_id=section_id,
        concept=concept,
        verdict=ReviewVerdict.ACCEPT,
        span=find_occurrences(section, concept)[0],
    )


def reject(section_id, phrase, why=""):
    return ReviewDecision(
        section_id=section_id,
        concept=normalize(phrase),
        verdict=ReviewVerdict.REJECT,
        rationale=why,
    )


def resolution(phrase, section_id, outcome):
    return Resolution(
        section_id=section_id, concept=normalize(phrase), outcome=outcome
    )


def print_agreement(bench, round_id):
    for label in (PhaseLabel.BEFORE_DISCUSSION, PhaseLabel.AFTER_DISCUSSION):
        report = bench.agreement_report(round_id, label)
        doc = report_to_dict(report)
        print(f"  {label.value}: mean pairwise {report.mean_pairwise:.3f}, "
              f"full consensus {report.full_consensus_fraction:.3f}")
        for pair, value in sorted(doc["pairwise"].items()):
            print(f"    {pair}: {value:.3f}")


def main() -> int:
    bench = Workbench()
    book = bench.ingest(
        (ROOT / "docs" / "sample_book.md").read_text(encoding="utf-8"),
        IngestConfig(textbook_id="tb", title="Retrieval notes"),
    )
    banner(f"ingested '{book.id}'")
    for chapter in book.chapters:
        print(f"  {chapter.id}: {chapter.title}")
        for section in chapter.sections:
            print(f"    {section.id}: {section.heading} ({section.char_count} chars)")

    for annotator_id in ("ana", "ben", "cat"):
        bench.add_annotator(annotator_id)
    gold = ["inverted index", "posting list"]
    bench.set_qualification_test("tb.c01.s01", [normalize(g) for g in gold])
    for annotator_id in ("ana", "ben", "cat"):
        score, passed = bench.qualify(annotator_id, [normalize(g) for g in gold])
        print(f"  qualified '{annotator_id}': score {score:.2f}")

    seed = json.loads((ROOT / "docs" / "seed_codebook.json").read_text("utf-8"))
    bench.seed_codebook([
        CodebookChange(
            action=c["action"], text=c["text"],
            examples=tuple((a, b) for a, b in c.get("examples", [])),
        )
        for c in seed
    ])

    # -- round 1: chapter on indexing structures --------------------------
    banner("round 1: tb.c01")
    r1 = bench.create_round("tb.c01")
    s1, s2 = "tb.c01.s01", "tb.c01.s02"
    tag(bench, r1.id, "ana", {
        s1: ["inverted index", "posting list", "delta encoding"],
        s2: ["b-tree", "b+ tree"],
    })
    tag(bench, r1.id, "ben", {
        s1: ["inverted index", "posting list"],
        s2: ["b-tree", "fill factor"],
    })
    tag(bench, r1.id, "cat", {
        s1: ["inverted index"],
        s2: ["b+ tree"],
    })

    print("  cat's missed-concept file:")
    for line in candidates_csv(bench.review_candidates(r1.id, "cat")).splitlines():
        print(f"    {line}")
    bench.submit_review(r1.id, "ana", [reject(s2, "fill factor", "tuning knob")])
    bench.submit_review(r1.id, "ben", [
        reject(s1, "delta encoding", "mentioned in passing"),
        accept(bench, s2, "b+ tree"),
    ])
    bench.submit_review(r1.id, "cat", [
        accept(bench, s1, "posting list"),
        reject(s1, "delta encoding"),
        accept(bench, s2, "b-tree"),
        reject(s2, "fill factor"),
    ])

    print("  disagreements going into discussion:")
    for case in bench.disagreements(r1.id):
        print(f"    {case.section_id}: '{case.concept.value}' "
              f"(support {case.support}: {', '.join(case.tagged_by)})")
    bench.submit_resolutions(r1.id, "ana", [
        resolution("delta encoding", s1, ResolutionOutcome.PROMOTE),
        resolution("fill factor", s2, ResolutionOutcome.DROP),
    ])
    bench.close_round(r1.id, "ana", [
        CodebookChange(
            action="add",
            text="Named encoding and compression schemes are concepts even "
                 "when mentioned in passing.",
            examples=(("delta encoding", "promoted in round 1"),),
        ),
    ])
    print_agreement(bench, r1.id)

    # -- round 2: chapter on ranking models -------------------------------
    banner("round 2: tb.c02")
    r2 = bench.create_round("tb.c02", lead_id="ben")
    s3, s4 = "tb.c02.s01", "tb.c02.s02"
    tag(bench, r2.id, "ana", {
        s3: ["tf-idf weighting", "cosine similarity"],
        s4: ["bm25 ranking function"],
    })
    tag(bench, r2.id, "ben", {
        s3: ["tf-idf weighting", "cosine similarity", "length normalization"],
        s4: ["bm25 ranking function"],
    })
    tag(bench, r2.id, "cat", {
        s3: ["tf-idf weighting"],
        s4: ["bm25 ranking function", "term frequency saturation"],
    })
    bench.submit_review(r2.id, "ana", [
        accept(bench, s3, "length normalization"),
        reject(s4, "term frequency saturation", "describes bm25, not a name"),
    ])
    bench.submit_review(r2.id, "ben", [
        accept(bench, s4, "term frequency saturation"),
    ])
    bench.submit_review(r2.id, "cat", [
        accept(bench, s3, "cosine similarity"),
        reject(s3, "length normalization"),
    ])
    bench.submit_resolutions(r2.id, "ben", [
        resolution("length normalization", s3, ResolutionOutcome.PROMOTE),
        resolution("term frequency saturation", s4, ResolutionOutcome.PROMOTE),
    ])
    bench.close_round(r2.id, "ben", [])
    print_agreement(bench, r2.id)

    # -- corpus-level outputs ---------------------------------------------
    banner("codebook")
    print(codebook_markdown(bench.codebook))
    convergence = bench.codebook.convergence_report([r.index for r in (r1, r2)])
    print(f"  additions per round: {list(convergence.additions)}")
    print(f"  converged at round: {convergence.converged_at}")

    banner("concept length distribution")
    print(table_text(bench.stats_table()))

    banner("canonical export")
    text = canonical_json(to_document(bench))
    print(f"  {len(text)} bytes; byte-stable: "
          f"{text == canonical_json(to_document(bench))}")

    problems = bench.validate()
    banner(f"integrity check: {'ok' if not problems else problems}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
