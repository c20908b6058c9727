"""Core value types for benchmark pools, capability taxonomies, and curation outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence


class DomainError(ValueError):
    """Raised when a domain value violates its structural contract."""


class AnswerKind(str, Enum):
    MULTIPLE_CHOICE = "multiple_choice"
    EXACT_TEXT = "exact_text"
    NUMERIC = "numeric"
    POINT_OR_REGION = "point_or_region"


OTHER_LABEL = "other"


def normalize_name(name: str) -> str:
    """Canonical form used for all name comparisons: trimmed + case-folded."""
    return name.strip().casefold()


@dataclass(frozen=True)
class MediaRef:
    """Reference to one media attachment. ``frames`` is the frame count for videos
    when known up front (mock locators carry it; real decoders discover it)."""

    kind: str
    locator: str
    frames: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("image", "video"):
            raise DomainError(f"media kind must be 'image' or 'video', got {self.kind!r}")
        if not self.locator:
            raise DomainError("media locator must be non-empty")
        if self.frames is not None and self.frames < 1:
            raise DomainError(f"frame count must be >= 1, got {self.frames}")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "locator": self.locator}
        if self.frames is not None:
            d["frames"] = self.frames
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "MediaRef":
        return cls(kind=d["kind"], locator=d["locator"], frames=d.get("frames"))


@dataclass(frozen=True)
class SourceBenchmarkInfo:
    """One source benchmark: its name, descriptive prose, and how many of the
    pool's examples carry it as provenance."""

    name: str
    description: str = ""
    example_count: int = 0

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise DomainError("source benchmark name must be non-empty")
        if self.example_count < 0:
            raise DomainError("example_count must be non-negative")


@dataclass(frozen=True)
class Example:
    id: str
    source: str
    question: str
    media: tuple[MediaRef, ...] = ()
    answer: str = ""
    answer_kind: AnswerKind = AnswerKind.EXACT_TEXT
    choices: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise DomainError("example id must be non-empty")
        if self.answer_kind is AnswerKind.MULTIPLE_CHOICE and not self.choices:
            raise DomainError(f"example {self.id}: multiple_choice requires non-empty choices")

    def to_dict(self) -> dict:
        d: dict = {
            "id": self.id,
            "source": self.source,
            "question": self.question,
            "media": [m.to_dict() for m in self.media],
            "answer": self.answer,
            "answer_kind": self.answer_kind.value,
        }
        if self.choices is not None:
            d["choices"] = list(self.choices)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Example":
        choices = d.get("choices")
        return cls(
            id=d["id"],
            source=d["source"],
            question=d["question"],
            media=tuple(MediaRef.from_dict(m) for m in d.get("media", ())),
            answer=d["answer"],
            answer_kind=AnswerKind(d["answer_kind"]),
            choices=tuple(choices) if choices is not None else None,
        )


@dataclass(frozen=True)
class Dimension:
    name: str
    description: str = ""

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise DomainError("dimension name must be non-empty")


@dataclass(frozen=True)
class DimensionSet:
    """Ordered capability taxonomy. Order is the canonical tie-break order for
    label assignment; identity is the normalized name set."""

    dimensions: tuple[Dimension, ...]
    version: int = 1

    def __post_init__(self) -> None:
        if not self.dimensions:
            raise DomainError("dimension set must contain at least one dimension")
        normalized = [normalize_name(d.name) for d in self.dimensions]
        if len(set(normalized)) != len(normalized):
            dupes = sorted({n for n in normalized if normalized.count(n) > 1})
            raise DomainError(f"dimension names collide after normalization: {dupes}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def normalized_names(self) -> frozenset[str]:
        return frozenset(normalize_name(d.name) for d in self.dimensions)

    def canonical_label(self, raw: str) -> str | None:
        """Map a raw label onto the canonical dimension name (or OTHER_LABEL);
        None when it matches neither."""
        wanted = normalize_name(raw)
        if wanted == OTHER_LABEL:
            return OTHER_LABEL
        for d in self.dimensions:
            if normalize_name(d.name) == wanted:
                return d.name
        return None

    def same_names(self, other: "DimensionSet") -> bool:
        return self.normalized_names() == other.normalized_names()

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "dimensions": [{"name": d.name, "description": d.description} for d in self.dimensions],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DimensionSet":
        return cls(
            dimensions=tuple(Dimension(x["name"], x.get("description", "")) for x in d["dimensions"]),
            version=d.get("version", 1),
        )


@dataclass(frozen=True)
class Critique:
    """Reviewer feedback along the three review axes. All fields are always
    present; they may be empty on the first iteration."""

    specificity_feedback: str = ""
    minimality_feedback: str = ""
    balance_feedback: str = ""

    def is_empty(self) -> bool:
        return not (self.specificity_feedback or self.minimality_feedback or self.balance_feedback)

    def to_dict(self) -> dict:
        return {
            "specificity_feedback": self.specificity_feedback,
            "minimality_feedback": self.minimality_feedback,
            "balance_feedback": self.balance_feedback,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Critique":
        return cls(
            specificity_feedback=d.get("specificity_feedback", ""),
            minimality_feedback=d.get("minimality_feedback", ""),
            balance_feedback=d.get("balance_feedback", ""),
        )


@dataclass
class InductionMemory:
    """Append-only record of (proposal, critique) pairs accumulated over the
    induction run."""

    entries: list[tuple[DimensionSet, Critique]] = field(default_factory=list)

    def append(self, dims: DimensionSet, critique: Critique) -> None:
        self.entries.append((dims, critique))

    def __len__(self) -> int:
        return len(self.entries)

    def tail(self, n: int) -> list[tuple[DimensionSet, Critique]]:
        return self.entries[-n:] if n > 0 else []

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"dimensions": d.to_dict(), "critique": c.to_dict()} for d, c in self.entries
            ]
        }


@dataclass(frozen=True)
class BalanceStats:
    """Per-dimension source/retained counts plus the excluded 'other' bucket."""

    per_dimension: tuple[tuple[str, int, int], ...]  # (name, source_count, retained_count)
    other_count: int = 0
    total_source: int = 0
    total_retained: int = 0

    def __post_init__(self) -> None:
        for name, src, kept in self.per_dimension:
            if kept > src:
                raise DomainError(f"dimension {name}: retained {kept} exceeds source {src}")
            if src < 0 or kept < 0:
                raise DomainError(f"dimension {name}: negative count")
        if self.other_count < 0:
            raise DomainError("other_count must be non-negative")
        src_sum = sum(s for _, s, _ in self.per_dimension) + self.other_count
        kept_sum = sum(k for _, _, k in self.per_dimension)
        if src_sum != self.total_source:
            raise DomainError(f"total_source {self.total_source} != sum {src_sum}")
        if kept_sum != self.total_retained:
            raise DomainError(f"total_retained {self.total_retained} != sum {kept_sum}")

    @classmethod
    def from_counts(
        cls, per_dimension: Sequence[tuple[str, int, int]], other_count: int = 0
    ) -> "BalanceStats":
        per = tuple((str(n), int(s), int(k)) for n, s, k in per_dimension)
        return cls(
            per_dimension=per,
            other_count=int(other_count),
            total_source=sum(s for _, s, _ in per) + int(other_count),
            total_retained=sum(k for _, _, k in per),
        )

    def source_count(self, name: str) -> int:
        for n, s, _ in self.per_dimension:
            if n == name:
                return s
        raise KeyError(name)

    def retained_count(self, name: str) -> int:
        for n, _, k in self.per_dimension:
            if n == name:
                return k
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "per_dimension": [
                {"name": n, "source_count": s, "retained_count": k}
                for n, s, k in self.per_dimension
            ],
            "other_count": self.other_count,
            "total_source": self.total_source,
            "total_retained": self.total_retained,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BalanceStats":
        return cls(
            per_dimension=tuple(
                (x["name"], x["source_count"], x["retained_count"]) for x in d["per_dimension"]
            ),
            other_count=d["other_count"],
            total_source=d["total_source"],
            total_retained=d["total_retained"],
        )


@dataclass(frozen=True)
class Provenance:
    run_id: str = ""
    config_hash: str = ""

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "config_hash": self.config_hash}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Provenance":
        return cls(run_id=d.get("run_id", ""), config_hash=d.get("config_hash", ""))


@dataclass(frozen=True)
class CuratedBenchmark:
    """The compacted benchmark: per-dimension example-id pools ('other' excluded)
    plus the balance statistics that produced them."""

    dimension_set: DimensionSet
    pools: tuple[tuple[str, tuple[str, ...]], ...]  # (dimension name, example ids)
    stats: BalanceStats
    provenance: Provenance = Provenance()

    def __post_init__(self) -> None:
        dim_names = set(self.dimension_set.names)
        for name, _ in self.pools:
            if name == OTHER_LABEL:
                raise DomainError("curated pools must exclude the 'other' label")
            if name not in dim_names:
                raise DomainError(f"pool {name!r} is not a dimension of the set")

    def pool(self, name: str) -> tuple[str, ...]:
        for n, ids in self.pools:
            if n == name:
                return ids
        raise KeyError(name)

    def all_ids(self) -> list[str]:
        return [i for _, ids in self.pools for i in ids]

    def to_dict(self) -> dict:
        return {
            "dimension_set": self.dimension_set.to_dict(),
            "pools": {name: list(ids) for name, ids in self.pools},
            "pool_order": [name for name, _ in self.pools],
            "stats": self.stats.to_dict(),
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CuratedBenchmark":
        order = d.get("pool_order") or list(d["pools"].keys())
        return cls(
            dimension_set=DimensionSet.from_dict(d["dimension_set"]),
            pools=tuple((name, tuple(d["pools"][name])) for name in order),
            stats=BalanceStats.from_dict(d["stats"]),
            provenance=Provenance.from_dict(d.get("provenance", {})),
        )


@dataclass(frozen=True)
class ModelScorecard:
    """Per-dimension scores on the 0-100 scale plus their aggregate."""

    model: str
    per_dimension_scores: tuple[tuple[str, float], ...]
    average: float

    def __post_init__(self) -> None:
        for name, score in self.per_dimension_scores:
            if not (0.0 <= score <= 100.0):
                raise DomainError(f"{self.model}/{name}: score {score} outside [0, 100]")

    @classmethod
    def from_scores(
        cls,
        model: str,
        scores: Mapping[str, float] | Sequence[tuple[str, float]],
        weights: Mapping[str, float] | None = None,
    ) -> "ModelScorecard":
        """Build a scorecard; average is the unweighted mean unless per-dimension
        weights are supplied."""
        items = tuple(scores.items()) if isinstance(scores, Mapping) else tuple(scores)
        if not items:
            raise DomainError("scorecard requires at least one dimension score")
        if weights is None:
            avg = sum(s for _, s in items) / len(items)
        else:
            total_w = sum(weights[n] for n, _ in items)
            if total_w <= 0:
                raise DomainError("weights must sum to a positive value")
            avg = sum(s * weights[n] for n, s in items) / total_w
        return cls(model=model, per_dimension_scores=items, average=avg)

    def scores_dict(self) -> dict[str, float]:
        return dict(self.per_dimension_scores)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "per_dimension_scores": {n: s for n, s in self.per_dimension_scores},
            "dimension_order": [n for n, _ in self.per_dimension_scores],
            "average": self.average,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelScorecard":
        order = d.get("dimension_order") or list(d["per_dimension_scores"].keys())
        return cls(
            model=d["model"],
            per_dimension_scores=tuple((n, d["per_dimension_scores"][n]) for n in order),
            average=d["average"],
        )


@dataclass(frozen=True)
class Violation:
    """One curated-benchmark integrity violation. Violations are data, not faults."""

    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


def validate_curated(bench: CuratedBenchmark, pool: Iterable[Example]) -> list[Violation]:
    """Check a curated benchmark against its source pool.

    Returns an empty list iff every invariant holds: each id appears in exactly
    one pool, every id exists in the source pool, no 'other' pool is present,
    and the balance statistics agree with the pools.
    """
    violations: list[Violation] = []
    known = {e.id for e in pool}
    seen: dict[str, str] = {}
    for name, ids in bench.pools:
        for ex_id in ids:
            if ex_id in seen:
                violations.append(
                    Violation(
                        "duplicate_membership",
                        f"id {ex_id!r} appears in pools {seen[ex_id]!r} and {name!r}",
                    )
                )
            else:
                seen[ex_id] = name
            if ex_id not in known:
                violations.append(
                    Violation("unknown_id", f"id {ex_id!r} in pool {name!r} not found in source pool")
                )
    stats = bench.stats
    stat_names = [n for n, _, _ in stats.per_dimension]
    pool_names = [n for n, _ in bench.pools]
    if stat_names != pool_names:
        violations.append(
            Violation("stats_mismatch", f"stats dimensions {stat_names} != pools {pool_names}")
        )
    else:
        for name, ids in bench.pools:
            if stats.retained_count(name) != len(ids):
                violations.append(
                    Violation(
                        "stats_mismatch",
                        f"dimension {name!r}: retained_count {stats.retained_count(name)} "
                        f"!= pool size {len(ids)}",
                    )
                )
    return violations


def scorecard_average_consistent(card: ModelScorecard, tol: float = 1e-9) -> bool:
    """True when the stored average matches the unweighted mean of the
    per-dimension scores within ``tol``."""
    mean = sum(s for _, s in card.per_dimension_scores) / len(card.per_dimension_scores)
    return abs(mean - card.average) <= tol
