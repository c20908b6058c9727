"""evalforge: agentic benchmark curation and automated evaluation-pipeline synthesis.

The library induces a capability taxonomy over a heterogeneous pool of
benchmark examples through cooperating chat-model roles, compacts the pool
into a balanced diversity-maximizing benchmark via fixed-K clustering, and
synthesizes sandbox-validated inference/scoring code for evaluating models on
the result, with ranking, agreement, fidelity, compression, and speedup
reporting.
"""

from .domain import (
    AnswerKind,
    BalanceStats,
    Critique,
    CuratedBenchmark,
    Dimension,
    DimensionSet,
    Example,
    InductionMemory,
    MediaRef,
    ModelScorecard,
    Provenance,
    SourceBenchmarkInfo,
    Violation,
    validate_curated,
)
from .corpus import CorpusFormat, MissingMediaPolicy, ingest_corpus, write_corpus
from .gateway import (
    BackendConfig,
    HttpBackend,
    PromptTemplate,
    RateLimiter,
    ScriptedBackend,
    complete,
    extract_structured,
    load_template,
    render,
)
from .assignment import AssignmentTable, VoteRecord, build_assignment, cast_votes, majority_vote
from .induction import InductionConfig, InductionTrace, propose, review, run_induction
from .sampler import (
    ClusterModel,
    EmbeddingBackendConfig,
    assemble_benchmark,
    benchmark_similarity,
    encode,
    encode_pool,
    fit_clusters,
    project_balance,
    select_representatives,
)
from .synthesis import (
    CodeArtifact,
    EvaluationRun,
    ModelConfig,
    SynthesisConfig,
    execute_evaluation,
    select_probes,
    synthesize_inference,
    synthesize_scoring,
)
from .sandbox import (
    Diagnostic,
    ExecutionLimits,
    ExecutionRequest,
    ExecutionResult,
    LocalExecutor,
    ScriptedExecutor,
    WorkerClient,
)
from .metrics import (
    AgreementReport,
    FidelityReport,
    RankingReport,
    build_fidelity_report,
    build_ranking_report,
    cohen_kappa,
    compression_ratio,
    fleiss_kappa,
    inference_fidelity,
    kendall_tau,
    overall_fidelity,
    score_fidelity,
    spearman_rho,
    speedup,
)
from .report import emit_report, render_report_text

__version__ = "0.1.0"
