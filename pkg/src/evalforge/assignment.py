"""Dimension assignment: per-example voter ensembles resolved by majority vote
into pools that partition the corpus (plus the 'other' bucket)."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .domain import OTHER_LABEL, DimensionSet, Example, normalize_name
from .gateway import ChatBackend, ExtractionError, PromptTemplate, load_template, render

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VoteRecord:
    example_id: str
    voter_index: int
    label: str  # canonical dimension name or "other"
    reason: str

    def to_dict(self) -> dict:
        return {
            "voter_index": self.voter_index,
            "label": self.label,
            "reason": self.reason,
        }


@dataclass
class AssignmentTable:
    """Final labels plus the votes behind them; pools partition the example set."""

    dimension_set: DimensionSet
    per_example: dict[str, tuple[str, tuple[VoteRecord, ...]]] = field(default_factory=dict)
    dimension_pools: dict[str, list[str]] = field(default_factory=dict)
    other_pool: list[str] = field(default_factory=list)

    def final_label(self, example_id: str) -> str:
        return self.per_example[example_id][0]

    def pool_sizes(self) -> dict[str, int]:
        sizes = {name: len(ids) for name, ids in self.dimension_pools.items()}
        sizes[OTHER_LABEL] = len(self.other_pool)
        return sizes


def serialize_dimensions_slot(dims: DimensionSet) -> str:
    return "\n".join(f"- {d.name}: {d.description}" for d in dims.dimensions)


def serialize_example_slot(example: Example) -> str:
    payload = {
        "id": example.id,
        "question": example.question,
        "answer_kind": example.answer_kind.value,
        "media": [m.to_dict() for m in example.media],
    }
    if example.choices:
        payload["choices"] = list(example.choices)
    return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def cast_votes(
    backend: ChatBackend,
    example: Example,
    dims: DimensionSet,
    n_voters: int,
    *,
    domain_description: str = "",
    template: PromptTemplate | None = None,
) -> list[VoteRecord]:
    """Collect exactly n_voters labels for one example.

    Labels are validated against the dimension set plus "other". An invalid
    label gets one re-prompt; if still invalid it is coerced to "other" with a
    flagged reason (never silently mapped onto a real dimension).
    """
    if n_voters < 1:
        raise ValueError("n_voters must be >= 1")
    template = template or load_template("voter")
    prompt = render(
        template,
        {
            "domain": domain_description,
            "dimensions": serialize_dimensions_slot(dims),
            "example": serialize_example_slot(example),
        },
    )
    valid = {normalize_name(n) for n in dims.names} | {OTHER_LABEL}
    records: list[VoteRecord] = []
    for voter_index in range(n_voters):
        label: str | None = None
        reason = ""
        for attempt in range(2):  # original call + one re-prompt
            try:
                raw_name, reason = extract_vote(backend.complete(prompt), valid)
            except ExtractionError as exc:
                if attempt == 0:
                    log.warning("voter %d for %s: %s; re-prompting", voter_index, example.id, exc)
                    continue
                label, reason = OTHER_LABEL, f"[coerced to other after invalid responses] {exc}"
                break
            label = dims.canonical_label(raw_name) or OTHER_LABEL
            break
        assert label is not None
        records.append(
            VoteRecord(example_id=example.id, voter_index=voter_index, label=label, reason=reason)
        )
    return records


def extract_vote(text: str, valid_labels: set[str]) -> tuple[str, str]:
    from .gateway import extract_structured

    return extract_structured(text, "vote", valid_labels=valid_labels)


def majority_vote(labels: Sequence[str], dims: DimensionSet) -> str:
    """Most frequent label; ties break toward the earliest dimension in
    canonical order, with "other" losing every tie against a real dimension.
    "other" still wins outright majorities."""
    if not labels:
        raise ValueError("labels must be non-empty")
    counts = Counter(labels)
    top = max(counts.values())
    tied = [label for label, c in counts.items() if c == top]
    if len(tied) == 1:
        return tied[0]
    order = {name: i for i, name in enumerate(dims.names)}
    real = [label for label in tied if label in order]
    if real:
        return min(real, key=order.__getitem__)
    return OTHER_LABEL


def build_assignment(
    backend: ChatBackend,
    pool: Sequence[Example],
    dims: DimensionSet,
    n_voters: int,
    *,
    domain_description: str = "",
    resume_path: str | Path | None = None,
) -> AssignmentTable:
    """Label every example and aggregate per-dimension pools.

    When resume_path is given, each completed example is appended to that file
    immediately, and examples already present there are not re-voted, so an
    interrupted run can be resumed without re-spending backend calls.
    """
    if not pool:
        raise ValueError("pool must be non-empty")
    table = AssignmentTable(dimension_set=dims)
    table.dimension_pools = {name: [] for name in dims.names}

    done: dict[str, tuple[str, tuple[VoteRecord, ...]]] = {}
    if resume_path is not None and Path(resume_path).exists():
        done = {
            row.example_id: row_entry
            for row, row_entry in _load_rows(resume_path, expected_voters=n_voters)
        }

    template = load_template("voter")
    sink = open(resume_path, "a", encoding="utf-8") if resume_path is not None else None
    try:
        for example in pool:
            if example.id in done:
                final, votes = done[example.id]
            else:
                votes = tuple(
                    cast_votes(
                        backend,
                        example,
                        dims,
                        n_voters,
                        domain_description=domain_description,
                        template=template,
                    )
                )
                final = majority_vote([v.label for v in votes], dims)
                if sink is not None:
                    sink.write(_row_line(example.id, final, votes) + "\n")
                    sink.flush()
            table.per_example[example.id] = (final, votes)
            if final == OTHER_LABEL:
                table.other_pool.append(example.id)
            else:
                table.dimension_pools[final].append(example.id)
    finally:
        if sink is not None:
            sink.close()
    return table


def _row_line(example_id: str, final: str, votes: tuple[VoteRecord, ...]) -> str:
    return json.dumps(
        {
            "example_id": example_id,
            "final_label": final,
            "votes": [v.to_dict() for v in votes],
        },
        sort_keys=True,
        ensure_ascii=False,
    )


@dataclass(frozen=True)
class _Row:
    example_id: str


def _load_rows(path: str | Path, *, expected_voters: int | None = None):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            votes = tuple(
                VoteRecord(
                    example_id=doc["example_id"],
                    voter_index=v["voter_index"],
                    label=v["label"],
                    reason=v["reason"],
                )
                for v in doc["votes"]
            )
            if expected_voters is not None and len(votes) != expected_voters:
                raise ValueError(
                    f"resume file row {doc['example_id']!r} has {len(votes)} votes, "
                    f"expected {expected_voters}"
                )
            yield _Row(doc["example_id"]), (doc["final_label"], votes)


def persist_assignment(table: AssignmentTable, path: str | Path) -> None:
    """Line-delimited audit trail: id, final label, and every vote with reason.
    A leading header row carries the dimension set."""
    lines = [
        json.dumps(
            {"dimension_set": table.dimension_set.to_dict()}, sort_keys=True, ensure_ascii=False
        )
    ]
    for example_id, (final, votes) in table.per_example.items():
        lines.append(_row_line(example_id, final, votes))
    from .jsonutil import atomic_write_text

    atomic_write_text(path, "\n".join(lines) + "\n")


def load_assignment(path: str | Path) -> AssignmentTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"empty assignment table: {path}")
    header = json.loads(lines[0])
    dims = DimensionSet.from_dict(header["dimension_set"])
    table = AssignmentTable(dimension_set=dims)
    table.dimension_pools = {name: [] for name in dims.names}
    for line in lines[1:]:
        doc = json.loads(line)
        votes = tuple(
            VoteRecord(
                example_id=doc["example_id"],
                voter_index=v["voter_index"],
                label=v["label"],
                reason=v["reason"],
            )
            for v in doc["votes"]
        )
        final = doc["final_label"]
        table.per_example[doc["example_id"]] = (final, votes)
        if final == OTHER_LABEL:
            table.other_pool.append(doc["example_id"])
        else:
            table.dimension_pools[final].append(doc["example_id"])
    return table


def source_distribution(counts: dict[str, int]) -> dict[str, float]:
    """Share of the total pool per label, in percent."""
    total = sum(counts.values())
    if total == 0:
        raise ValueError("empty distribution")
    return {name: 100.0 * c / total for name, c in counts.items()}
