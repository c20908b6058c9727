"""Evaluation-logic synthesis: iterative generation of inference and scoring
code against a sandbox, plus full-benchmark execution once both validate."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domain import CuratedBenchmark, Example, ModelScorecard
from .gateway import ChatBackend, load_template, render, request_structured
from .sandbox import (
    Diagnostic,
    ExecutionLimits,
    ExecutionRequest,
    SandboxExecutor,
)

log = logging.getLogger(__name__)

KIND_INFERENCE = "inference"
KIND_SCORING = "scoring"


class SynthesisError(RuntimeError):
    pass


class UnvalidatedArtifactError(SynthesisError):
    """An operation that requires a validated artifact received an unvalidated one."""


@dataclass(frozen=True)
class SynthesisConfig:
    max_iterations: int = 5
    probe_size: int = 5
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)
    diagnostic_byte_cap: int = 4096  # truncation keeps the tail: causes end tracebacks
    inference_entry: str = "run_vlm_inference"
    scoring_entry: str = "eval_score"
    failed_item_policy: str = "zero"  # or "skip"
    pool_weighted_average: bool = False

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.probe_size < 1:
            raise ValueError("probe_size must be >= 1")
        if self.failed_item_policy not in ("zero", "skip"):
            raise ValueError("failed_item_policy must be 'zero' or 'skip'")


@dataclass(frozen=True)
class ModelConfig:
    """Target model under evaluation; model_path is whatever the synthesized
    inference code loads or calls (a path, an endpoint, a mock tag)."""

    name: str
    model_path: str
    gen_kwargs: tuple[tuple[str, object], ...] = ()
    visual_kwargs: tuple[tuple[str, object], ...] = ()


@dataclass(frozen=True)
class CodeArtifact:
    kind: str
    source_text: str
    history: tuple[tuple[str, Diagnostic | None], ...]
    iterations_used: int
    validated: bool

    def __post_init__(self) -> None:
        if self.iterations_used != len(self.history):
            raise ValueError("iterations_used must equal history length")
        if self.validated and self.history and self.history[-1][1] is not None:
            raise ValueError("a validated artifact cannot end on a diagnostic")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "source_text": self.source_text,
            "history": [
                {"source_text": src, "diagnostic": diag.to_dict() if diag else None}
                for src, diag in self.history
            ],
            "iterations_used": self.iterations_used,
            "validated": self.validated,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CodeArtifact":
        return cls(
            kind=d["kind"],
            source_text=d["source_text"],
            history=tuple(
                (
                    h["source_text"],
                    Diagnostic.from_dict(h["diagnostic"]) if h["diagnostic"] else None,
                )
                for h in d["history"]
            ),
            iterations_used=d["iterations_used"],
            validated=d["validated"],
        )


@dataclass
class EvaluationRun:
    model: str
    per_dimension_predictions: dict[str, list[tuple[str, str]]]
    scorecard: ModelScorecard
    wall_clock_seconds: float
    failed_items: list[str] = field(default_factory=list)

    def to_dict(self, *, include_timing: bool = True) -> dict:
        d = {
            "model": self.model,
            "per_dimension_predictions": {
                dim: [[ex_id, pred] for ex_id, pred in preds]
                for dim, preds in self.per_dimension_predictions.items()
            },
            "dimension_order": list(self.per_dimension_predictions.keys()),
            "scorecard": self.scorecard.to_dict(),
            "failed_items": list(self.failed_items),
        }
        if include_timing:
            d["wall_clock_seconds"] = self.wall_clock_seconds
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvaluationRun":
        order = d.get("dimension_order") or list(d["per_dimension_predictions"].keys())
        return cls(
            model=d["model"],
            per_dimension_predictions={
                dim: [(p[0], p[1]) for p in d["per_dimension_predictions"][dim]] for dim in order
            },
            scorecard=ModelScorecard.from_dict(d["scorecard"]),
            wall_clock_seconds=d.get("wall_clock_seconds", 0.0),
            failed_items=list(d.get("failed_items", [])),
        )


# ---------------------------------------------------------------------------
# Probe selection and payload shaping


def select_probes(examples: Sequence[Example], probe_size: int) -> list[Example]:
    """Round-robin across answer kinds (in first-appearance order), taking each
    kind's earliest examples, until probe_size probes are collected. Stratifying
    by answer kind exercises every output format the pool contains."""
    by_kind: dict[str, list[Example]] = {}
    kind_order: list[str] = []
    for ex in examples:
        key = ex.answer_kind.value
        if key not in by_kind:
            by_kind[key] = []
            kind_order.append(key)
        by_kind[key].append(ex)
    probes: list[Example] = []
    depth = 0
    while len(probes) < probe_size:
        added = False
        for kind in kind_order:
            bucket = by_kind[kind]
            if depth < len(bucket):
                probes.append(bucket[depth])
                added = True
                if len(probes) >= probe_size:
                    break
        if not added:
            break
        depth += 1
    return probes


def inference_payload_item(example: Example) -> dict:
    """What the synthesized inference function sees per example: the question
    and visuals, never the answer."""
    item: dict = {
        "id": example.id,
        "question": example.question,
        "media": [m.to_dict() for m in example.media],
        "answer_kind": example.answer_kind.value,
    }
    if example.choices:
        item["choices"] = list(example.choices)
    return item


def _truncate_tail(text: str, cap: int) -> str:
    data = text.encode("utf-8")
    if len(data) <= cap:
        return text
    return data[-cap:].decode("utf-8", errors="ignore")


def _diagnostic_slot(diag: Diagnostic | None, cap: int) -> str:
    if diag is None:
        return ""
    return _truncate_tail(diag.render(), cap)


# ---------------------------------------------------------------------------
# Synthesis loops


def _inference_request(
    code: str, model: ModelConfig, items: Sequence[dict], cfg: SynthesisConfig
) -> ExecutionRequest:
    args: list = [model.model_path, list(items)]
    kwargs: dict = {}
    if model.gen_kwargs:
        kwargs["gen_kwargs"] = dict(model.gen_kwargs)
    if model.visual_kwargs:
        kwargs["visual_kwargs"] = dict(model.visual_kwargs)
    return ExecutionRequest(
        code=code,
        entry=cfg.inference_entry,
        payload={"args": args, "kwargs": kwargs},
        limits=cfg.limits,
    )


def _check_inference_result(result: object, expected: int) -> Diagnostic | None:
    if not isinstance(result, list) or len(result) != expected:
        return Diagnostic(
            error_type="BadInferenceOutput",
            message=(
                f"inference must return a list of {expected} strings, "
                f"got {type(result).__name__}"
                + (f" of length {len(result)}" if isinstance(result, list) else "")
            ),
        )
    bad = [i for i, v in enumerate(result) if not isinstance(v, str)]
    if bad:
        return Diagnostic(
            error_type="BadInferenceOutput",
            message=f"inference outputs at positions {bad[:5]} are not strings",
        )
    return None


def synthesize_inference(
    backend: ChatBackend,
    model: ModelConfig,
    probes: Sequence[Example],
    executor: SandboxExecutor,
    cfg: SynthesisConfig,
) -> CodeArtifact:
    """Generate-execute-refine until the inference code runs cleanly over the
    probe set or the iteration budget is spent."""
    if not probes:
        raise ValueError("probes must be non-empty")
    template = load_template("evaluator")
    items = [inference_payload_item(p) for p in probes]
    history: list[tuple[str, Diagnostic | None]] = []
    previous_code = ""
    diagnostic: Diagnostic | None = None
    for _ in range(cfg.max_iterations):
        prompt = render(
            template,
            {
                "vlm_type": model.name,
                "benchmark_example": json.dumps(items[0], sort_keys=True, ensure_ascii=False),
                "previous_code": previous_code,
                "execution_error": _diagnostic_slot(diagnostic, cfg.diagnostic_byte_cap),
            },
        )
        code = request_structured(backend, prompt, "code_block")
        result = executor.execute(_inference_request(code, model, items, cfg))
        diagnostic = result.diagnostic
        if diagnostic is None:
            diagnostic = _check_inference_result(result.result, len(items))
        history.append((code, diagnostic))
        previous_code = code
        if diagnostic is None:
            return CodeArtifact(
                kind=KIND_INFERENCE,
                source_text=code,
                history=tuple(history),
                iterations_used=len(history),
                validated=True,
            )
        log.info("inference synthesis iteration %d failed: %s", len(history), diagnostic.message)
    return CodeArtifact(
        kind=KIND_INFERENCE,
        source_text=history[-1][0],
        history=tuple(history),
        iterations_used=len(history),
        validated=False,
    )


def _scoring_request(code: str, pred: str, answer: str, cfg: SynthesisConfig) -> ExecutionRequest:
    return ExecutionRequest(
        code=code,
        entry=cfg.scoring_entry,
        payload={"args": [pred, answer]},
        limits=cfg.limits,
    )


def _finite_score(value: object) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    if not math.isfinite(value):
        return None
    return float(value)


def synthesize_scoring(
    backend: ChatBackend,
    probes: Sequence[Example],
    predictions: Sequence[tuple[str, str]],
    bench_info: str,
    executor: SandboxExecutor,
    cfg: SynthesisConfig,
) -> CodeArtifact:
    """Same loop as inference synthesis; validation additionally requires every
    probe to yield a finite numeric score."""
    if not probes:
        raise ValueError("probes must be non-empty")
    pred_map = dict(predictions)
    missing = [p.id for p in probes if p.id not in pred_map]
    if missing:
        raise ValueError(f"predictions missing for probes {missing}")
    template = load_template("scorer")
    probe_doc = {
        "example": json.dumps(probes[0].to_dict(), sort_keys=True, ensure_ascii=False),
        "prediction": pred_map[probes[0].id],
    }
    history: list[tuple[str, Diagnostic | None]] = []
    previous_code = ""
    diagnostic: Diagnostic | None = None
    for _ in range(cfg.max_iterations):
        prompt = render(
            template,
            {
                "benchmark_infor": bench_info,
                "benchmark_example": json.dumps(probe_doc, sort_keys=True, ensure_ascii=False),
                "previous_code": previous_code,
                "execution_error": _diagnostic_slot(diagnostic, cfg.diagnostic_byte_cap),
            },
        )
        code = request_structured(backend, prompt, "code_block")
        diagnostic = None
        for probe in probes:
            result = executor.execute(
                _scoring_request(code, pred_map[probe.id], probe.answer, cfg)
            )
            if result.diagnostic is not None:
                diagnostic = Diagnostic(
                    error_type=result.diagnostic.error_type,
                    message=f"probe {probe.id}: {result.diagnostic.message}",
                    trace_excerpt=result.diagnostic.trace_excerpt,
                )
                break
            if _finite_score(result.result) is None:
                diagnostic = Diagnostic(
                    error_type="NonNumericScore",
                    message=(
                        f"probe {probe.id}: non-numeric score "
                        f"{result.result!r} ({type(result.result).__name__})"
                    ),
                )
                break
        history.append((code, diagnostic))
        previous_code = code
        if diagnostic is None:
            return CodeArtifact(
                kind=KIND_SCORING,
                source_text=code,
                history=tuple(history),
                iterations_used=len(history),
                validated=True,
            )
        log.info("scoring synthesis iteration %d failed: %s", len(history), diagnostic.message)
    return CodeArtifact(
        kind=KIND_SCORING,
        source_text=history[-1][0],
        history=tuple(history),
        iterations_used=len(history),
        validated=False,
    )


def run_inference_artifact(
    artifact: CodeArtifact,
    model: ModelConfig,
    examples: Sequence[Example],
    executor: SandboxExecutor,
    cfg: SynthesisConfig,
) -> list[tuple[str, str]] | Diagnostic:
    """Apply a validated inference artifact to a list of examples; returns
    aligned (id, prediction) pairs or the diagnostic that prevented them."""
    items = [inference_payload_item(ex) for ex in examples]
    result = executor.execute(_inference_request(artifact.source_text, model, items, cfg))
    if result.diagnostic is not None:
        return result.diagnostic
    bad = _check_inference_result(result.result, len(items))
    if bad is not None:
        return bad
    return [(ex.id, pred) for ex, pred in zip(examples, result.result)]


def execute_evaluation(
    inference: CodeArtifact,
    scoring: CodeArtifact,
    bench: CuratedBenchmark,
    pool: Mapping[str, Example],
    model: ModelConfig,
    executor: SandboxExecutor,
    cfg: SynthesisConfig,
) -> EvaluationRun:
    """Run the validated pipeline over every dimension pool.

    Per-dimension score is the mean item score scaled to [0, 100]; the
    scorecard average is the unweighted mean over dimensions (pool-size
    weighting behind cfg.pool_weighted_average). Failed items score zero by
    default ('skip' excludes them from the mean) and are always logged.
    """
    if not inference.validated:
        raise UnvalidatedArtifactError("inference artifact is not validated")
    if not scoring.validated:
        raise UnvalidatedArtifactError("scoring artifact is not validated")
    start = time.perf_counter()
    predictions: dict[str, list[tuple[str, str]]] = {}
    failed: list[str] = []
    dim_scores: dict[str, float] = {}
    weights: dict[str, float] = {}
    for dim_name, ids in bench.pools:
        examples = [pool[i] for i in ids]
        weights[dim_name] = float(len(examples))
        if not examples:
            predictions[dim_name] = []
            dim_scores[dim_name] = 0.0
            continue
        outcome = run_inference_artifact(inference, model, examples, executor, cfg)
        if isinstance(outcome, Diagnostic):
            log.warning(
                "%s/%s: inference failed for whole pool: %s", model.name, dim_name, outcome.message
            )
            preds: list[tuple[str, str]] = [(ex.id, "") for ex in examples]
            item_ok = {ex.id: False for ex in examples}
        else:
            preds = outcome
            item_ok = {ex_id: True for ex_id, _ in preds}
        predictions[dim_name] = preds
        pred_map = dict(preds)
        item_scores: list[float] = []
        for ex in examples:
            score: float | None = None
            if item_ok[ex.id]:
                result = executor.execute(
                    _scoring_request(scoring.source_text, pred_map[ex.id], ex.answer, cfg)
                )
                if result.diagnostic is None:
                    score = _finite_score(result.result)
            if score is None:
                failed.append(ex.id)
                log.warning(
                    "%s/%s: item %s failed; policy=%s",
                    model.name,
                    dim_name,
                    ex.id,
                    cfg.failed_item_policy,
                )
                if cfg.failed_item_policy == "zero":
                    item_scores.append(0.0)
            else:
                if not (0.0 <= score <= 1.0):
                    log.warning(
                        "%s/%s: item %s score %s outside [0, 1]; clamping",
                        model.name,
                        dim_name,
                        ex.id,
                        score,
                    )
                item_scores.append(min(max(score, 0.0), 1.0))
        dim_scores[dim_name] = 100.0 * (sum(item_scores) / len(item_scores)) if item_scores else 0.0
    scorecard = ModelScorecard.from_scores(
        model.name, dim_scores, weights=weights if cfg.pool_weighted_average else None
    )
    return EvaluationRun(
        model=model.name,
        per_dimension_predictions=predictions,
        scorecard=scorecard,
        wall_clock_seconds=time.perf_counter() - start,
        failed_items=failed,
    )
