"""Stage-per-command pipeline wiring: induce -> assign -> sample -> synth ->
eval -> report, with provenance manifests, atomic artifact writes, and a lock
per output directory."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import assignment as assignment_mod
from . import induction as induction_mod
from . import sampler as sampler_mod
from .corpus import CorpusFormat, MissingMediaPolicy, ingest_corpus
from .domain import CuratedBenchmark, DimensionSet, Example
from .gateway import BackendConfig, ChatBackend, HttpBackend, ScriptedBackend
from .induction import InductionConfig
from .jsonutil import (
    atomic_write_text,
    canonical_dumps,
    canonical_dumps_pretty,
    load_json,
    sha256_file,
    sha256_text,
)
from .report import emit_report, render_report_text
from .sandbox import ExecutionLimits, LocalExecutor, SandboxExecutor, WorkerClient
from .synthesis import (
    CodeArtifact,
    EvaluationRun,
    ModelConfig,
    SynthesisConfig,
    UnvalidatedArtifactError,
    execute_evaluation,
    run_inference_artifact,
    select_probes,
    synthesize_inference,
    synthesize_scoring,
)

log = logging.getLogger(__name__)

STAGES = ("induce", "assign", "sample", "synth", "eval", "report")

ROLE_NAMES = ("proposer", "reviewer", "voter", "evaluator", "scorer")


class PipelineError(RuntimeError):
    pass


class ConfigError(PipelineError):
    pass


class MissingInputError(PipelineError):
    pass


@dataclass
class PipelineConfig:
    """Validated pipeline configuration plus the raw document it was built from
    (the raw document is what gets hashed for provenance)."""

    raw: dict
    corpus_path: Path
    out_dir: Path
    k: int
    n_voters: int
    seed: int
    domain_description: str
    source_descriptions: dict[str, str]
    induction: InductionConfig
    embedding: sampler_mod.EmbeddingBackendConfig
    roles: dict[str, dict]
    scripted_fixtures: dict[str, Path]
    sandbox: dict
    synthesis: SynthesisConfig
    models: list[ModelConfig]
    bench_info: str
    baselines_path: Path | None
    missing_media: MissingMediaPolicy
    run_id: str = ""

    @property
    def config_hash(self) -> str:
        return sha256_text(canonical_dumps(self.raw))[:16]


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Load + validate a JSON pipeline config; overrides (seed, k, n_voters,
    out) are applied before hashing so provenance reflects the effective run."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = load_json(path)
    except ValueError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if overrides:
        nested = {"max_inner": "max_inner_iters", "max_outer": "max_outer_rounds"}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in nested:
                raw.setdefault("induction", {})[nested[key]] = value
            elif key == "domain_desc":
                raw["domain_description"] = value
            else:
                raw[key] = value
    return _build_config(raw, base_dir=path.parent)


def _build_config(raw: dict, base_dir: Path) -> PipelineConfig:
    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base_dir / candidate

    try:
        corpus_path = resolve(raw["corpus"])
        out_dir = resolve(raw["out"])
    except KeyError as exc:
        raise ConfigError(f"config missing required key {exc}") from exc
    if not corpus_path.exists():
        raise ConfigError(f"corpus file not found: {corpus_path}")

    k = int(raw.get("k", 500))
    n_voters = int(raw.get("n_voters", 5))
    if k < 1:
        raise ConfigError("k must be >= 1")
    if n_voters < 1:
        raise ConfigError("n_voters must be >= 1")
    if n_voters % 2 == 0 and not raw.get("allow_even_voters", False):
        raise ConfigError("n_voters should be odd (set allow_even_voters to override)")

    roles: dict[str, dict] = {}
    for role in ROLE_NAMES:
        spec = (raw.get("roles") or {}).get(role, {"kind": "scripted"})
        kind = spec.get("kind")
        if kind not in ("scripted", "http"):
            raise ConfigError(f"role {role}: backend kind must be 'scripted' or 'http'")
        if kind == "http":
            env = spec.get("api_key_env", "OPENAI_API_KEY")
            if not os.environ.get(env):
                raise ConfigError(f"role {role}: credential env var {env!r} is not set")
            if "base_url" not in spec or "model_name" not in spec:
                raise ConfigError(f"role {role}: http backend requires base_url and model_name")
        roles[role] = spec

    fixtures = {
        stage: resolve(p) for stage, p in (raw.get("scripted_fixtures") or {}).items()
    }
    for stage in fixtures:
        if stage not in STAGES:
            raise ConfigError(f"scripted_fixtures references unknown stage {stage!r}")

    ind = raw.get("induction") or {}
    try:
        induction_cfg = InductionConfig(
            max_inner_iters=int(ind.get("max_inner_iters", 6)),
            max_outer_rounds=int(ind.get("max_outer_rounds", 4)),
            domain_description=raw.get("domain_description", ""),
            memory_window=int(ind.get("memory_window", 3)),
            subsample_size=(
                int(ind["subsample_size"]) if ind.get("subsample_size") is not None else None
            ),
        )
        emb = raw.get("embedding") or {}
        embedding_cfg = sampler_mod.EmbeddingBackendConfig(
            text_endpoint=emb.get("text_endpoint", "mock"),
            image_endpoint=emb.get("image_endpoint", "mock"),
            text_dim=int(emb.get("text_dim", 16)),
            image_dim=int(emb.get("image_dim", 16)),
            max_frames=int(emb.get("max_frames", 32)),
            normalize_blocks=bool(emb.get("normalize_blocks", False)),
            api_key_env=emb.get("api_key_env", ""),
        )
        syn = raw.get("synthesis") or {}
        limits = syn.get("sandbox_limits") or {}
        synthesis_cfg = SynthesisConfig(
            max_iterations=int(syn.get("max_iterations", 5)),
            probe_size=int(syn.get("probe_size", 5)),
            limits=ExecutionLimits(
                timeout_seconds=float(limits.get("timeout_seconds", 30.0)),
                memory_bytes=int(limits.get("memory_bytes", 512 * 1024 * 1024)),
                output_bytes=int(limits.get("output_bytes", 1024 * 1024)),
            ),
            diagnostic_byte_cap=int(syn.get("diagnostic_byte_cap", 4096)),
            inference_entry=syn.get("inference_entry", "run_vlm_inference"),
            scoring_entry=syn.get("scoring_entry", "eval_score"),
            failed_item_policy=syn.get("failed_item_policy", "zero"),
            pool_weighted_average=bool(syn.get("pool_weighted_average", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sandbox = raw.get("sandbox") or {"kind": "local"}
    if sandbox.get("kind") not in ("local", "worker"):
        raise ConfigError("sandbox kind must be 'local' or 'worker'")
    if sandbox.get("kind") == "worker" and not sandbox.get("command"):
        raise ConfigError("worker sandbox requires a command")

    models = []
    for m in raw.get("models", []):
        if not isinstance(m, dict) or not m.get("name"):
            raise ConfigError(f"every models entry needs a non-empty name: {m!r}")
        models.append(
            ModelConfig(
                name=m["name"],
                model_path=m.get("model_path", m["name"]),
                gen_kwargs=tuple(sorted((m.get("gen_kwargs") or {}).items())),
                visual_kwargs=tuple(sorted((m.get("visual_kwargs") or {}).items())),
            )
        )
    tags = [_model_tag(m.name) for m in models]
    if len(set(tags)) != len(tags):
        raise ConfigError(f"model names collide after path sanitization: {sorted(tags)}")

    baselines = raw.get("baselines")
    cfg = PipelineConfig(
        raw=raw,
        corpus_path=corpus_path,
        out_dir=out_dir,
        k=k,
        n_voters=n_voters,
        seed=int(raw.get("seed", 0)),
        domain_description=raw.get("domain_description", ""),
        source_descriptions=dict(raw.get("source_descriptions") or {}),
        induction=induction_cfg,
        embedding=embedding_cfg,
        roles=roles,
        scripted_fixtures=fixtures,
        sandbox=sandbox,
        synthesis=synthesis_cfg,
        models=models,
        bench_info=raw.get("bench_info", ""),
        baselines_path=resolve(baselines) if baselines else None,
        missing_media=MissingMediaPolicy(raw.get("missing_media", "fail")),
    )
    cfg.run_id = raw.get("run_id") or cfg.config_hash[:12]
    return cfg


# ---------------------------------------------------------------------------
# Artifact paths


def artifact_paths(cfg: PipelineConfig) -> dict[str, Path]:
    out = cfg.out_dir
    paths = {
        "dimension_set": out / "dimension_set.json",
        "induction_trace": out / "induction_trace.json",
        "assignment_table": out / "assignment_table.jsonl",
        "encodings": out / "encodings.bin",
        "curated_benchmark": out / "curated_benchmark.json",
        "timings": out / "timings.json",
        "report_json": out / "report.json",
        "report_text": out / "report.txt",
    }
    for model in cfg.models:
        tag = _model_tag(model.name)
        paths[f"inference:{model.name}"] = out / "artifacts" / tag / "inference.json"
        paths[f"scoring:{model.name}"] = out / "artifacts" / tag / "scoring.json"
        paths[f"run:{model.name}"] = out / "runs" / f"{tag}.json"
    return paths


def _model_tag(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


_STAGE_INPUTS: dict[str, tuple[str, ...]] = {
    "induce": (),
    "assign": ("dimension_set",),
    "sample": ("assignment_table",),
    "synth": ("curated_benchmark",),
    "eval": ("curated_benchmark", "artifacts"),
    "report": ("runs",),
}


def _stage_backends(cfg: PipelineConfig, stage: str) -> dict[str, ChatBackend]:
    """Per-stage role backends. Scripted roles share one canned transcript per
    stage (ordered responses keyed by role)."""
    scripted: ScriptedBackend | None = None
    backends: dict[str, ChatBackend] = {}
    for role, spec in cfg.roles.items():
        if spec["kind"] == "http":
            backends[role] = HttpBackend(
                BackendConfig(
                    base_url=spec["base_url"],
                    model_name=spec["model_name"],
                    api_key_env=spec.get("api_key_env", "OPENAI_API_KEY"),
                    timeout=float(spec.get("timeout", 60.0)),
                    max_retries=int(spec.get("max_retries", 2)),
                    temperature=float(spec.get("temperature", 0.0)),
                )
            )
        else:
            if scripted is None:
                fixture = cfg.scripted_fixtures.get(stage)
                if fixture is None:
                    raise ConfigError(
                        f"stage {stage!r} uses scripted backends but has no scripted fixture"
                    )
                if not fixture.exists():
                    raise MissingInputError(f"scripted fixture not found: {fixture}")
                scripted = ScriptedBackend.from_file(str(fixture))
            backends[role] = scripted.for_role(role)
    return backends


def _executor(cfg: PipelineConfig) -> SandboxExecutor:
    if cfg.sandbox["kind"] == "worker":
        return WorkerClient(cfg.sandbox["command"])
    return LocalExecutor()


def _ingest(cfg: PipelineConfig):
    return ingest_corpus(
        cfg.corpus_path,
        CorpusFormat.JSONL,
        descriptions=cfg.source_descriptions,
        missing_media=cfg.missing_media,
    )


# ---------------------------------------------------------------------------
# Stages


def _load_benchmark(paths: Mapping[str, Path]) -> CuratedBenchmark:
    return CuratedBenchmark.from_dict(load_json(paths["curated_benchmark"]))


def _pool_examples(bench: CuratedBenchmark, pool: Mapping[str, Example]) -> list[Example]:
    return [pool[i] for i in bench.all_ids()]


def _stage_induce(cfg: PipelineConfig, paths: dict[str, Path]) -> dict[str, Path]:
    infos, pool = _ingest(cfg)
    backends = _stage_backends(cfg, "induce")

    def assigner(subpool: Sequence[Example], dims: DimensionSet) -> CuratedBenchmark:
        table = assignment_mod.build_assignment(
            backends["voter"],
            subpool,
            dims,
            cfg.n_voters,
            domain_description=cfg.domain_description,
        )
        encodings = sampler_mod.encode_pool(subpool, cfg.embedding)
        return sampler_mod.assemble_benchmark(
            table,
            encodings,
            cfg.k,
            cfg.seed,
            run_id=cfg.run_id,
            config_hash=cfg.config_hash,
        )

    dims, _, trace = induction_mod.run_induction(backends, infos, pool, cfg.induction, assigner)
    atomic_write_text(paths["dimension_set"], canonical_dumps_pretty(dims.to_dict()) + "\n")
    atomic_write_text(paths["induction_trace"], canonical_dumps_pretty(trace.to_dict()) + "\n")
    return {"dimension_set": paths["dimension_set"], "induction_trace": paths["induction_trace"]}


def _stage_assign(cfg: PipelineConfig, paths: dict[str, Path]) -> dict[str, Path]:
    _, pool = _ingest(cfg)
    dims = DimensionSet.from_dict(load_json(paths["dimension_set"]))
    backends = _stage_backends(cfg, "assign")
    table = assignment_mod.build_assignment(
        backends["voter"], pool, dims, cfg.n_voters, domain_description=cfg.domain_description
    )
    assignment_mod.persist_assignment(table, paths["assignment_table"])
    return {"assignment_table": paths["assignment_table"]}


def _stage_sample(cfg: PipelineConfig, paths: dict[str, Path]) -> dict[str, Path]:
    _, pool = _ingest(cfg)
    table = assignment_mod.load_assignment(paths["assignment_table"])
    pooled_ids = {i for ids in table.dimension_pools.values() for i in ids}
    pooled = [ex for ex in pool if ex.id in pooled_ids]
    encodings = sampler_mod.encode_pool(
        pooled, cfg.embedding, cache_path=str(paths["encodings"])
    )
    bench = sampler_mod.assemble_benchmark(
        table, encodings, cfg.k, cfg.seed, run_id=cfg.run_id, config_hash=cfg.config_hash
    )
    atomic_write_text(paths["curated_benchmark"], canonical_dumps_pretty(bench.to_dict()) + "\n")
    return {
        "curated_benchmark": paths["curated_benchmark"],
        "encodings": paths["encodings"],
    }


def _stage_synth(cfg: PipelineConfig, paths: dict[str, Path]) -> dict[str, Path]:
    if not cfg.models:
        raise ConfigError("synth stage requires at least one model in the config")
    _, pool = _ingest(cfg)
    pool_map = {ex.id: ex for ex in pool}
    bench = _load_benchmark(paths)
    probes = select_probes(_pool_examples(bench, pool_map), cfg.synthesis.probe_size)
    if not probes:
        raise MissingInputError("curated benchmark is empty; nothing to probe")
    backends = _stage_backends(cfg, "synth")
    executor = _executor(cfg)
    outputs: dict[str, Path] = {}
    unvalidated: list[str] = []
    for model in cfg.models:
        inference = synthesize_inference(
            backends["evaluator"], model, probes, executor, cfg.synthesis
        )
        if inference.validated:
            preds = run_inference_artifact(inference, model, probes, executor, cfg.synthesis)
            if isinstance(preds, list):
                scoring = synthesize_scoring(
                    backends["scorer"], probes, preds, cfg.bench_info, executor, cfg.synthesis
                )
            else:
                scoring = CodeArtifact(
                    kind="scoring", source_text="", history=(), iterations_used=0, validated=False
                )
        else:
            scoring = CodeArtifact(
                kind="scoring", source_text="", history=(), iterations_used=0, validated=False
            )
        for kind, artifact in (("inference", inference), ("scoring", scoring)):
            path = paths[f"{kind}:{model.name}"]
            atomic_write_text(path, canonical_dumps_pretty(artifact.to_dict()) + "\n")
            outputs[f"{kind}:{model.name}"] = path
            if not artifact.validated:
                unvalidated.append(f"{model.name}/{kind}")
    if unvalidated:
        raise UnvalidatedArtifactError(
            f"synthesis budget exhausted without validation for: {', '.join(unvalidated)}"
        )
    return outputs


def _stage_eval(cfg: PipelineConfig, paths: dict[str, Path]) -> dict[str, Path]:
    if not cfg.models:
        raise ConfigError("eval stage requires at least one model in the config")
    _, pool = _ingest(cfg)
    pool_map = {ex.id: ex for ex in pool}
    bench = _load_benchmark(paths)
    executor = _executor(cfg)
    outputs: dict[str, Path] = {}
    timings: dict[str, float] = {}
    for model in cfg.models:
        inference = CodeArtifact.from_dict(load_json(paths[f"inference:{model.name}"]))
        scoring = CodeArtifact.from_dict(load_json(paths[f"scoring:{model.name}"]))
        run = execute_evaluation(
            inference, scoring, bench, pool_map, model, executor, cfg.synthesis
        )
        path = paths[f"run:{model.name}"]
        atomic_write_text(path, canonical_dumps_pretty(run.to_dict(include_timing=False)) + "\n")
        outputs[f"run:{model.name}"] = path
        timings[model.name] = run.wall_clock_seconds
    # Wall-clock sidecar: operational data, deliberately outside the manifest
    # so rerun determinism stays checkable on the hashed artifacts.
    atomic_write_text(paths["timings"], canonical_dumps_pretty(timings) + "\n")
    return outputs


def _stage_report(cfg: PipelineConfig, paths: dict[str, Path]) -> dict[str, Path]:
    runs = [
        EvaluationRun.from_dict(load_json(paths[f"run:{model.name}"])) for model in cfg.models
    ]
    baselines = None
    timings = None
    if cfg.baselines_path is not None:
        if not cfg.baselines_path.exists():
            raise MissingInputError(f"baselines file not found: {cfg.baselines_path}")
        doc = load_json(cfg.baselines_path)
        baselines = doc.get("columns")
        raw_timings = doc.get("timings")
        if raw_timings:
            timings = {m: (v[0], v[1]) for m, v in raw_timings.items()}
    report = emit_report(runs, baselines, timings)
    atomic_write_text(paths["report_json"], canonical_dumps_pretty(report) + "\n")
    atomic_write_text(paths["report_text"], render_report_text(report))
    return {"report_json": paths["report_json"], "report_text": paths["report_text"]}


_STAGE_FNS = {
    "induce": _stage_induce,
    "assign": _stage_assign,
    "sample": _stage_sample,
    "synth": _stage_synth,
    "eval": _stage_eval,
    "report": _stage_report,
}


def _required_paths(stage: str, cfg: PipelineConfig, paths: dict[str, Path]) -> list[Path]:
    wanted: list[Path] = []
    for token in _STAGE_INPUTS[stage]:
        if token == "artifacts":
            for model in cfg.models:
                wanted.append(paths[f"inference:{model.name}"])
                wanted.append(paths[f"scoring:{model.name}"])
        elif token == "runs":
            for model in cfg.models:
                wanted.append(paths[f"run:{model.name}"])
        else:
            wanted.append(paths[token])
    return wanted


def run_stage(stage: str, cfg: PipelineConfig, *, force: bool = False) -> dict[str, Path]:
    """Run one stage: check inputs, honor the per-directory lock, refuse to mix
    configs with existing outputs unless forced, write outputs atomically, and
    record a provenance manifest."""
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
    paths = artifact_paths(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    inputs = _required_paths(stage, cfg, paths)
    for p in inputs:
        if not p.exists():
            raise MissingInputError(
                f"stage {stage!r} requires missing input {p} (run the producing stage first)"
            )

    manifest_path = cfg.out_dir / "manifests" / f"{stage}.json"
    if manifest_path.exists() and not force:
        previous = load_json(manifest_path)
        if previous.get("config_hash") != cfg.config_hash:
            raise ConfigError(
                f"stage {stage!r} outputs exist for config {previous.get('config_hash')}, "
                f"current config is {cfg.config_hash}; pass force=True/--force to overwrite"
            )

    lock = cfg.out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory is locked by another stage run: {lock}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        outputs = _STAGE_FNS[stage](cfg, paths)
    finally:
        try:
            os.unlink(lock)
        except OSError:
            pass

    manifest = {
        "stage": stage,
        "config_hash": cfg.config_hash,
        "run_id": cfg.run_id,
        "inputs": {str(p.relative_to(cfg.out_dir)) if p.is_relative_to(cfg.out_dir) else str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p.relative_to(cfg.out_dir)): sha256_file(p) for p in outputs.values()},
    }
    atomic_write_text(manifest_path, canonical_dumps_pretty(manifest) + "\n")
    return outputs
