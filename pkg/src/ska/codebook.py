"""Versioned annotation rule store with per-round provenance.

Rules are never deleted, only added or amended, so any past codebook
version can be reconstructed and convergence (the round after which no new
rules appeared) is decidable from the store alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import NotFoundError, ValidationError


@dataclass
class CodebookRule:
    id: str
    text: str
    examples: tuple[tuple[str, str], ...] = ()  # (concept example, explanation)
    round_introduced: int = 0  # 0 = seed rule from study setup
    amendments: tuple[tuple[int, str], ...] = ()  # (round index, new text), increasing

    def effective_text(self, as_of_round: int) -> str:
        text = self.text
        for round_index, new_text in self.amendments:
            if round_index <= as_of_round:
                text = new_text
        return text


@dataclass(frozen=True)
class CodebookVersion:
    as_of_round: int
    rules: tuple[tuple[str, str], ...]  # (rule id, effective text) in rule order


@dataclass(frozen=True)
class ConvergenceReport:
    additions: tuple[tuple[int, int], ...]  # (closed round index, rules added)
    converged_at: int | None


class Codebook:
    """Ordered rule store; write access is funneled through round closure."""

    def __init__(self, rules: Iterable[CodebookRule] = ()):
        self.rules: list[CodebookRule] = list(rules)

    def rule(self, rule_id: str) -> CodebookRule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise NotFoundError(f"no codebook rule '{rule_id}'")

    def add_rule(
        self,
        text: str,
        examples: Sequence[tuple[str, str]] = (),
        round_index: int = 0,
    ) -> CodebookRule:
        if not text or not text.strip():
            raise ValidationError("codebook rule text must be non-empty")
        if round_index < 0:
            raise ValidationError("round index must be >= 0")
        rule = CodebookRule(
            id=f"r{len(self.rules) + 1:02d}",
            text=text.strip(),
            examples=tuple((c, e) for c, e in examples),
            round_introduced=round_index,
        )
        self.rules.append(rule)
        return rule

    def amend_rule(self, rule_id: str, new_text: str, round_index: int) -> CodebookRule:
        if not new_text or not new_text.strip():
            raise ValidationError("amendment text must be non-empty")
        rule = self.rule(rule_id)
        floor = rule.amendments[-1][0] if rule.amendments else rule.round_introduced
        if round_index <= floor:
            raise ValidationError(
                f"amendment round {round_index} must be greater than {floor} "
                f"for rule '{rule_id}'"
            )
        rule.amendments = rule.amendments + ((round_index, new_text.strip()),)
        return rule

    def version_at(self, round_index: int) -> CodebookVersion:
        """Every rule introduced by the given round, with its text as of then."""
        if round_index < 0:
            raise ValidationError("round index must be >= 0")
        effective = tuple(
            (r.id, r.effective_text(round_index))
            for r in self.rules
            if r.round_introduced <= round_index
        )
        return CodebookVersion(as_of_round=round_index, rules=effective)

    def convergence_report(self, closed_round_indices: Sequence[int]) -> ConvergenceReport:
        """Rules added per closed round and the round the codebook converged at.

        converged_at is the smallest r such that at least one closed round
        beyond r exists and every closed round beyond r added zero rules.
        """
        if not closed_round_indices:
            raise ValidationError("convergence needs at least one closed round")
        indices = sorted(set(closed_round_indices))
        added = {
            i: sum(1 for r in self.rules if r.round_introduced == i) for i in indices
        }
        last_addition = max((i for i in indices if added[i] > 0), default=0)
        converged_at = last_addition if any(i > last_addition for i in indices) else None
        return ConvergenceReport(
            additions=tuple((i, added[i]) for i in indices),
            converged_at=converged_at,
        )


@dataclass
class CodebookChange:
    """One entry of a round-closure payload: an addition or an amendment."""

    action: str  # "add" | "amend"
    text: str
    examples: tuple[tuple[str, str], ...] = ()
    rule_id: str | None = None  # amend only

    def __post_init__(self):
        if self.action not in ("add", "amend"):
            raise ValidationError(f"unknown codebook change action '{self.action}'")
        if self.action == "amend" and not self.rule_id:
            raise ValidationError("amendment requires rule_id")


def apply_changes(
    codebook: Codebook, changes: Sequence[CodebookChange], round_index: int
) -> list[CodebookRule]:
    """Apply a closure payload; returns rules added (amendments excluded)."""
    added = []
    for change in changes:
        if change.action == "add":
            added.append(codebook.add_rule(change.text, change.examples, round_index))
        else:
            codebook.amend_rule(change.rule_id, change.text, round_index)
    return added


def codebook_to_dict(codebook: Codebook) -> list[dict]:
    return [
        {
            "id": r.id,
            "text": r.text,
            "examples": [list(e) for e in r.examples],
            "round_introduced": r.round_introduced,
            "amendments": [[i, t] for i, t in r.amendments],
        }
        for r in codebook.rules
    ]


def codebook_markdown(codebook: Codebook, as_of_round: int | None = None) -> str:
    """Human-readable export: id, effective text, examples, provenance."""
    lines = ["# Annotation codebook", ""]
    for r in codebook.rules:
        if as_of_round is not None and r.round_introduced > as_of_round:
            continue
        text = r.effective_text(as_of_round) if as_of_round is not None else (
            r.effective_text(r.amendments[-1][0]) if r.amendments else r.text
        )
        origin = "seed" if r.round_introduced == 0 else f"round {r.round_introduced}"
        lines.append(f"## {r.id} ({origin})")
        lines.append("")
        lines.append(text)
        if r.amendments:
            amended = ", ".join(f"round {i}" for i, _ in r.amendments)
            lines.append("")
            lines.append(f"Amended in: {amended}")
        if r.examples:
            lines.append("")
            for concept, explanation in r.examples:
                lines.append(f"- `{concept}`: {explanation}")
        lines.append("")
    return "\n".join(lines)
