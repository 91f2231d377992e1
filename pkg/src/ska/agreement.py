"""Consensus partitions and inter-annotator agreement scores.

Agreement is computed at concept-type level: the per-annotator unit is the
set of distinct normalized concepts tagged in a section.  The scalar metric
is Jaccard; two empty sets agree perfectly by convention (a section nobody
annotated carries no disagreement signal).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import AbstractSet, Mapping, Sequence

from .corpus import NormalizedConcept
from .errors import ArityError


class PhaseLabel(str, Enum):
    BEFORE_DISCUSSION = "before_discussion"
    AFTER_DISCUSSION = "after_discussion"


@dataclass(frozen=True)
class SupportPartition:
    """Disjoint buckets keyed by support count k = number of annotators.

    Section scope buckets hold concepts; round scope buckets hold
    (section_id, concept) cases so a concept tagged at different support
    levels in different sections stays in exactly one bucket per case.
    """

    n: int
    by_support: dict[int, frozenset]

    def union_size(self) -> int:
        return sum(len(v) for v in self.by_support.values())


def partition_by_support(
    sets: Sequence[AbstractSet[NormalizedConcept]],
) -> SupportPartition:
    """Assign every concept in the union to the bucket of its support count."""
    n = len(sets)
    if n < 2:
        raise ArityError(f"support partition needs at least 2 sets, got {n}")
    counts: dict[NormalizedConcept, int] = {}
    for s in sets:
        for concept in s:
            counts[concept] = counts.get(concept, 0) + 1
    buckets: dict[int, set] = {k: set() for k in range(1, n + 1)}
    for concept, k in counts.items():
        buckets[k].add(concept)
    return SupportPartition(
        n=n, by_support={k: frozenset(v) for k, v in buckets.items()}
    )


def pairwise_agreement(a: AbstractSet, b: AbstractSet) -> float:
    """Jaccard overlap |a & b| / |a | b|; 1.0 when both sets are empty."""
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union


@dataclass(frozen=True)
class AgreementReport:
    scope: str
    phase_label: PhaseLabel
    partition: SupportPartition
    pairwise: dict[tuple[str, str], float]
    mean_pairwise: float
    full_consensus_fraction: float
    sections: tuple["AgreementReport", ...] = field(default=())


def section_report(
    section_id: str,
    label: PhaseLabel,
    sets_by_annotator: Mapping[str, AbstractSet[NormalizedConcept]],
) -> AgreementReport:
    annotators = sorted(sets_by_annotator)
    partition = partition_by_support([sets_by_annotator[a] for a in annotators])
    pairwise = {
        (a, b): pairwise_agreement(sets_by_annotator[a], sets_by_annotator[b])
        for a, b in combinations(annotators, 2)
    }
    union = partition.union_size()
    consensus = len(partition.by_support[partition.n])
    return AgreementReport(
        scope=section_id,
        phase_label=label,
        partition=partition,
        pairwise=pairwise,
        mean_pairwise=sum(pairwise.values()) / len(pairwise),
        full_consensus_fraction=consensus / union if union else 1.0,
    )


def round_report(
    round_id: str,
    label: PhaseLabel,
    per_section: Sequence[tuple[str, Mapping[str, AbstractSet[NormalizedConcept]]]],
    annotator_ids: Sequence[str],
) -> AgreementReport:
    """Aggregate per-section reports to round scope.

    Pairwise values macro-average over sections (every section weighs the
    same regardless of length).  The partition aggregates per-section
    buckets as (section, concept) cases, and the consensus fraction is the
    case-level ratio sum(|support=N|) / sum(|union|).
    """
    annotators = sorted(annotator_ids)
    n = len(annotators)
    if n < 2:
        raise ArityError(f"round report needs at least 2 annotators, got {n}")
    reports = [
        section_report(section_id, label, sets) for section_id, sets in per_section
    ]
    pairs = list(combinations(annotators, 2))
    pairwise = {
        pair: (
            sum(r.pairwise[pair] for r in reports) / len(reports) if reports else 1.0
        )
        for pair in pairs
    }
    buckets: dict[int, set] = {k: set() for k in range(1, n + 1)}
    for r in reports:
        for k, concepts in r.partition.by_support.items():
            buckets[k].update((r.scope, c) for c in concepts)
    consensus = len(buckets[n])
    union = sum(len(v) for v in buckets.values())
    return AgreementReport(
        scope=round_id,
        phase_label=label,
        partition=SupportPartition(
            n=n, by_support={k: frozenset(v) for k, v in buckets.items()}
        ),
        pairwise=pairwise,
        mean_pairwise=sum(pairwise.values()) / len(pairs),
        full_consensus_fraction=consensus / union if union else 1.0,
        sections=tuple(reports),
    )


def _partition_to_dict(partition: SupportPartition) -> dict:
    out = {}
    for k in sorted(partition.by_support):
        items = partition.by_support[k]
        if items and isinstance(next(iter(items)), tuple):
            out[str(k)] = sorted([sid, c.value] for sid, c in items)
        else:
            out[str(k)] = sorted(c.value for c in items)
    return out


def report_to_dict(report: AgreementReport) -> dict:
    """JSON-ready form of a report; keys and lists are canonically ordered."""
    doc = {
        "scope": report.scope,
        "phase_label": report.phase_label.value,
        "partition": _partition_to_dict(report.partition),
        "pairwise": {f"{a}|{b}": v for (a, b), v in sorted(report.pairwise.items())},
        "mean_pairwise": report.mean_pairwise,
        "full_consensus_fraction": report.full_consensus_fraction,
    }
    if report.sections:
        doc["sections"] = [report_to_dict(s) for s in report.sections]
    return doc


def report_csv(report: AgreementReport) -> str:
    """One-line CSV summary: round, phase, means, then one column per pair."""
    pairs = sorted(report.pairwise)
    header = ["round_id", "phase", "mean_pairwise", "full_consensus_fraction"]
    header += [f"{a}|{b}" for a, b in pairs]
    row = [
        report.scope,
        report.phase_label.value,
        repr(report.mean_pairwise),
        repr(report.full_consensus_fraction),
    ]
    row += [repr(report.pairwise[p]) for p in pairs]
    return ",".join(header) + "\n" + ",".join(row) + "\n"
