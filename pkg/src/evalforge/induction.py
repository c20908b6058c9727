"""Capability-dimension induction: a Proposer/Reviewer inner loop with shared
memory, wrapped in an outer loop that validates each stabilized candidate
against empirical balance statistics until the taxonomy stops changing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .domain import (
    BalanceStats,
    Critique,
    CuratedBenchmark,
    Dimension,
    DimensionSet,
    Example,
    InductionMemory,
    SourceBenchmarkInfo,
)
from .gateway import ChatBackend, ExtractionError, load_template, render, request_structured

log = logging.getLogger(__name__)

STOP_FIXED_POINT = "fixed_point"
STOP_BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class InductionConfig:
    max_inner_iters: int = 6
    max_outer_rounds: int = 4
    domain_description: str = ""
    memory_window: int = 3  # most recent (proposal, critique) pairs fed back to the proposer
    subsample_size: int | None = None  # None = assign the full pool each round

    def __post_init__(self) -> None:
        if self.max_inner_iters < 1 or self.max_outer_rounds < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.memory_window < 0:
            raise ValueError("memory_window must be >= 0")


@dataclass(frozen=True)
class RoundRecord:
    inner_iterations: int
    dimension_set: DimensionSet
    critique: Critique
    stats: BalanceStats

    def to_dict(self) -> dict:
        return {
            "inner_iterations": self.inner_iterations,
            "dimension_set": self.dimension_set.to_dict(),
            "critique": self.critique.to_dict(),
            "stats": self.stats.to_dict(),
        }


@dataclass
class InductionTrace:
    rounds: list[RoundRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = STOP_BUDGET_EXHAUSTED
    memory: InductionMemory = field(default_factory=InductionMemory)

    def to_dict(self) -> dict:
        return {
            "rounds": [r.to_dict() for r in self.rounds],
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "memory": self.memory.to_dict(),
        }


def serialize_infos_slot(infos: Sequence[SourceBenchmarkInfo]) -> str:
    blocks = []
    for info in infos:
        blocks.append(f"### {info.name} ({info.example_count} examples)\n{info.description}")
    return "\n\n".join(blocks)


def serialize_critique_slot(critique: Critique) -> str:
    if critique.is_empty():
        return ""
    return (
        f"Specificity: {critique.specificity_feedback}\n"
        f"Minimality: {critique.minimality_feedback}\n"
        f"Balance: {critique.balance_feedback}"
    )


def serialize_memory_slot(memory: InductionMemory, window: int) -> str:
    entries = memory.tail(window)
    if not entries:
        return ""
    blocks = []
    start = len(memory) - len(entries) + 1
    for offset, (dims, critique) in enumerate(entries):
        names = ", ".join(dims.names)
        blocks.append(
            f"Proposal {start + offset}: [{names}]\n"
            f"Critique: {serialize_critique_slot(critique) or '(none)'}"
        )
    return "\n\n".join(blocks)


BALANCE_UNAVAILABLE = "not available this round"


def serialize_stats_slot(stats: BalanceStats | None) -> str:
    if stats is None:
        return BALANCE_UNAVAILABLE
    lines = [
        f"{name}: source={src}, retained={kept}" for name, src, kept in stats.per_dimension
    ]
    lines.append(f"other: source={stats.other_count}, retained=0")
    lines.append(f"total: source={stats.total_source}, retained={stats.total_retained}")
    return "\n".join(lines)


def propose(
    backend: ChatBackend,
    infos: Sequence[SourceBenchmarkInfo],
    critique: Critique,
    memory: InductionMemory,
    *,
    memory_window: int = 3,
    version: int = 1,
    max_format_retries: int = 1,
) -> DimensionSet:
    """One Proposer call: render the proposal prompt from benchmark info, the
    current critique, and recent memory; parse the returned dimension list.
    The caller appends to memory after the paired review."""
    prompt = render(
        load_template("proposer"),
        {
            "description": serialize_infos_slot(infos),
            "memory": serialize_memory_slot(memory, memory_window),
            "critique": serialize_critique_slot(critique),
        },
    )
    pairs = request_structured(
        backend, prompt, "dimension_list", max_format_retries=max_format_retries
    )
    if not pairs:
        raise ExtractionError("proposer returned an empty dimension list")
    return DimensionSet(
        dimensions=tuple(Dimension(name, desc) for name, desc in pairs), version=version
    )


def review(
    backend: ChatBackend,
    dims: DimensionSet,
    stats: BalanceStats | None,
    *,
    domain_description: str = "",
    max_format_retries: int = 1,
) -> Critique:
    """One Reviewer call; absent stats render as the 'not available' marker."""
    from .assignment import serialize_dimensions_slot

    prompt = render(
        load_template("reviewer"),
        {
            "domain": domain_description,
            "dimension_desc": serialize_dimensions_slot(dims),
            "balance_stats": serialize_stats_slot(stats),
        },
    )
    return request_structured(backend, prompt, "critique", max_format_retries=max_format_retries)


Assigner = Callable[[Sequence[Example], DimensionSet], CuratedBenchmark]


def run_induction(
    roles: Mapping[str, ChatBackend],
    infos: Sequence[SourceBenchmarkInfo],
    pool: Sequence[Example],
    cfg: InductionConfig,
    assigner: Assigner,
) -> tuple[DimensionSet, CuratedBenchmark, InductionTrace]:
    """Run the full induction procedure.

    Inner loop: propose -> review -> memory append, until two consecutive
    proposals have equal normalized name sets or the inner budget runs out.
    Outer loop: assign + sample the (sub)pool with the stabilized candidate,
    feed the balance-informed critique into the next inner loop, and stop at
    the outer fixed point or the outer budget. Budget exhaustion is a success
    with a flag, not a failure.
    """
    proposer = roles["proposer"]
    reviewer = roles["reviewer"]
    subpool = pool if cfg.subsample_size is None else pool[: cfg.subsample_size]
    if not subpool:
        raise ValueError("induction requires a non-empty example pool")

    trace = InductionTrace()
    memory = trace.memory
    critique = Critique()
    stats: BalanceStats | None = None
    prev_outer: DimensionSet | None = None
    bench: CuratedBenchmark | None = None
    version = 0

    for round_index in range(cfg.max_outer_rounds):
        prev_inner: DimensionSet | None = None
        candidate: DimensionSet | None = None
        inner_iterations = 0
        for _ in range(cfg.max_inner_iters):
            version += 1
            candidate = propose(
                proposer,
                infos,
                critique,
                memory,
                memory_window=cfg.memory_window,
                version=version,
            )
            critique = review(
                reviewer, candidate, stats, domain_description=cfg.domain_description
            )
            memory.append(candidate, critique)
            inner_iterations += 1
            if prev_inner is not None and candidate.same_names(prev_inner):
                break
            prev_inner = candidate
        assert candidate is not None

        bench = assigner(subpool, candidate)
        stats = bench.stats
        critique = review(
            reviewer, candidate, stats, domain_description=cfg.domain_description
        )
        trace.rounds.append(
            RoundRecord(
                inner_iterations=inner_iterations,
                dimension_set=candidate,
                critique=critique,
                stats=stats,
            )
        )
        log.info(
            "induction round %d: %d inner iterations, dims=%s",
            round_index + 1,
            inner_iterations,
            list(candidate.names),
        )
        if prev_outer is not None and candidate.same_names(prev_outer):
            trace.converged = True
            trace.stop_reason = STOP_FIXED_POINT
            break
        prev_outer = candidate

    assert bench is not None
    final_dims = trace.rounds[-1].dimension_set
    return final_dims, bench, trace
