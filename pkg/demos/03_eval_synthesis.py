#!/usr/bin/env python3
"""Synthesize inference and scoring code through the execute-refine loop, then
run the validated pipeline over a small curated benchmark."""

from evalforge import (
    BalanceStats,
    CuratedBenchmark,
    Dimension,
    DimensionSet,
    LocalExecutor,
    ModelConfig,
    SynthesisConfig,
    execute_evaluation,
    select_probes,
    synthesize_inference,
    synthesize_scoring,
)
from evalforge.gateway import ScriptedBackend
from evalforge.synthesis import run_inference_artifact
from tiny_world import toy_pool

BROKEN = """\
def run_vlm_inference(model_path, benchmark_input, gen_kwargs=None, visual_kwargs=None):
    return [prediction_for(item) for item in benchmark_input]
"""

FIXED = """\
def run_vlm_inference(model_path, benchmark_input, gen_kwargs=None, visual_kwargs=None):
    return ["gold-" + item["id"][1:].lstrip("0").rjust(1, "0") for item in benchmark_input]
"""

SCORER = """\
def eval_score(pred, answer):
    return 1.0 if pred.strip() == answer.strip() else 0.0
"""


def fenced(code):
    return f"```python\n{code}```"


def main():
    pool = toy_pool(12)
    pool_map = {e.id: e for e in pool}
    dims = DimensionSet((Dimension("Spatial", ""), Dimension("Counting", "")))
    pools = (
        ("Spatial", tuple(e.id for e in pool if int(e.id[1:]) % 2 == 0)),
        ("Counting", tuple(e.id for e in pool if int(e.id[1:]) % 2 == 1)),
    )
    bench = CuratedBenchmark(
        dimension_set=dims,
        pools=pools,
        stats=BalanceStats.from_counts([(n, len(ids), len(ids)) for n, ids in pools]),
    )
    model = ModelConfig(name="demo-model", model_path="mock://demo")
    cfg = SynthesisConfig(max_iterations=3, probe_size=4)
    executor = LocalExecutor()
    probes = select_probes([pool_map[i] for i in bench.all_ids()], cfg.probe_size)
    print(f"probe set: {[p.id for p in probes]} (stratified by answer kind)")

    print("\n== inference synthesis: broken first draft, repaired second ==")
    backend = ScriptedBackend([("evaluator", fenced(BROKEN)), ("evaluator", fenced(FIXED))])
    inference = synthesize_inference(backend.for_role("evaluator"), model, probes, executor, cfg)
    for i, (_, diag) in enumerate(inference.history, start=1):
        print(f"iteration {i}: {'ok' if diag is None else diag.error_type + ': ' + diag.message}")
    print(f"validated={inference.validated} after {inference.iterations_used} iteration(s)")

    print("\n== scoring synthesis ==")
    preds = run_inference_artifact(inference, model, probes, executor, cfg)
    backend = ScriptedBackend([("scorer", fenced(SCORER))])
    scoring = synthesize_scoring(
        backend.for_role("scorer"), probes, preds, "toy benchmark, exact match", executor, cfg
    )
    print(f"validated={scoring.validated} after {scoring.iterations_used} iteration(s)")

    print("\n== full evaluation ==")
    run = execute_evaluation(inference, scoring, bench, pool_map, model, executor, cfg)
    for name, score in run.scorecard.per_dimension_scores:
        print(f"{name:<10} {score:6.2f}")
    print(f"{'average':<10} {run.scorecard.average:6.2f}")


if __name__ == "__main__":
    main()
