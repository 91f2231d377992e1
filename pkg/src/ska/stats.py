"""N-gram distribution statistics over consensus concept lists.

The table layout pairs a count with a two-decimal percentage for each gram
bucket (1, 2, 3, 4, 5+6) in four columns: occurrence and unique counts,
each before and after discussion.  Occurrences sum per-section consensus
lists, so a concept appearing in three sections counts three times; unique
counts distinct normalized values corpus-wide.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from typing import Iterable

from .corpus import NormalizedConcept

BUCKET_LABELS = ("1", "2", "3", "4", "5+6")


def bucket_label(gram_length: int) -> str:
    """Total bucketing: 1..4 map to themselves, everything longer to "5+6"."""
    if gram_length < 1:
        raise ValueError(f"gram_length must be >= 1, got {gram_length}")
    return str(gram_length) if gram_length <= 4 else "5+6"


def format_percent(count: int, total: int) -> str:
    """Round-half-up percentage with two decimals and a trailing %."""
    if total <= 0:
        raise ZeroDivisionError("percentage undefined for total <= 0")
    if not 0 <= count <= total:
        raise ValueError(f"count {count} outside [0, {total}]")
    with localcontext() as ctx:
        ctx.prec = 50
        pct = (Decimal(count) * 100 / Decimal(total)).quantize(
            Decimal("0.01"), rounding=ROUND_HALF_UP
        )
    return f"{pct}%"


@dataclass(frozen=True)
class NgramStats:
    buckets: dict[str, tuple[int, str]]  # label -> (count, percent string)
    total: int
    oversized: int  # concepts longer than 6 grams, folded into "5+6"


def ngram_distribution(concepts: Iterable[NormalizedConcept]) -> NgramStats:
    """Count concepts per gram bucket with formatted percentages.

    Empty input yields total 0 with every percentage "0.00%".
    """
    counts = {label: 0 for label in BUCKET_LABELS}
    oversized = 0
    total = 0
    for concept in concepts:
        counts[bucket_label(concept.gram_length)] += 1
        total += 1
        if concept.gram_length > 6:
            oversized += 1
    buckets = {
        label: (n, format_percent(n, total) if total else "0.00%")
        for label, n in counts.items()
    }
    return NgramStats(buckets=buckets, total=total, oversized=oversized)


@dataclass(frozen=True)
class CorpusStatsTable:
    occurrences_before: NgramStats
    unique_before: NgramStats
    occurrences_after: NgramStats
    unique_after: NgramStats


def build_stats_table(
    before_occurrences: Iterable[NormalizedConcept],
    after_occurrences: Iterable[NormalizedConcept],
) -> CorpusStatsTable:
    before = list(before_occurrences)
    after = list(after_occurrences)
    return CorpusStatsTable(
        occurrences_before=ngram_distribution(before),
        unique_before=ngram_distribution(set(before)),
        occurrences_after=ngram_distribution(after),
        unique_after=ngram_distribution(set(after)),
    )


_COLUMNS = (
    ("occurrences_before", "concepts (before discussion)"),
    ("unique_before", "unique concepts (before discussion)"),
    ("occurrences_after", "concepts (after discussion)"),
    ("unique_after", "unique concepts (after discussion)"),
)


def table_to_dict(table: CorpusStatsTable) -> dict:
    out = {}
    for attr, _title in _COLUMNS:
        stats: NgramStats = getattr(table, attr)
        out[attr] = {
            "buckets": {
                label: {"count": c, "percent": p}
                for label, (c, p) in stats.buckets.items()
            },
            "total": stats.total,
            "oversized": stats.oversized,
        }
    return out


def table_csv(table: CorpusStatsTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["grams"]
    for attr, _ in _COLUMNS:
        header += [f"{attr}_count", f"{attr}_percent"]
    writer.writerow(header)
    for label in BUCKET_LABELS:
        row = [label]
        for attr, _ in _COLUMNS:
            count, percent = getattr(table, attr).buckets[label]
            row += [count, percent]
        writer.writerow(row)
    totals = ["all"]
    for attr, _ in _COLUMNS:
        totals += [getattr(table, attr).total, ""]
    writer.writerow(totals)
    return buf.getvalue()


def table_text(table: CorpusStatsTable) -> str:
    """Aligned plain-text rendering mirroring the CSV layout."""
    rows = [["grams"] + [title for _, title in _COLUMNS]]
    for label in BUCKET_LABELS:
        row = [f"{label}-grams"]
        for attr, _ in _COLUMNS:
            count, percent = getattr(table, attr).buckets[label]
            row.append(f"{count} ({percent})")
        rows.append(row)
    rows.append(
        ["all grams"] + [str(getattr(table, attr).total) for attr, _ in _COLUMNS]
    )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    oversized = max(getattr(table, attr).oversized for attr, _ in _COLUMNS)
    if oversized:
        lines.append(f"note: {oversized} concept(s) longer than 6 grams counted under 5+6")
    return "\n".join(lines) + "\n"
