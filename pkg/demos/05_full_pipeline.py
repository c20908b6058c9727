#!/usr/bin/env python3
"""Run all six pipeline stages end to end in a scratch directory, then show
the provenance manifests and the final report.

Every backend is scripted and the sandbox is the in-process executor, so this
runs anywhere in seconds; point the role configs at HTTP endpoints and the
sandbox at the standalone worker for a real deployment.
"""

import json
import tempfile
from pathlib import Path

from evalforge.corpus import write_corpus
from evalforge.pipeline import STAGES, artifact_paths, load_config, run_stage
from tiny_world import DIM_NAMES, toy_pool

PROPOSAL = json.dumps([{"name": n, "description": f"{n} reasoning"} for n in DIM_NAMES])
CRITIQUE = json.dumps(
    {"specificity_feedback": "ok", "minimality_feedback": "ok", "balance_feedback": ""}
)
INFERENCE = (
    "```python\n"
    "def run_vlm_inference(model_path, benchmark_input, gen_kwargs=None, visual_kwargs=None):\n"
    "    import hashlib\n"
    "    rate = {\"mock://alpha\": 9, \"mock://beta\": 5}[model_path]\n"
    "    out = []\n"
    "    for item in benchmark_input:\n"
    "        digest = int(hashlib.sha256((model_path + item[\"id\"]).encode()).hexdigest(), 16)\n"
    "        gold = \"gold-\" + str(int(item[\"id\"][1:]))\n"
    "        out.append(gold if digest % 10 < rate else \"wrong\")\n"
    "    return out\n"
    "```"
)
SCORER = (
    "```python\n"
    "def eval_score(pred, answer):\n"
    "    return 1.0 if pred.strip() == answer.strip() else 0.0\n"
    "```"
)


def vote(i):
    return json.dumps({"name": DIM_NAMES[i % 2], "reason": "keyword"})


def build_workspace(root: Path) -> Path:
    pool = toy_pool(20)
    write_corpus(pool, root / "corpus.jsonl")
    fixtures = root / "fixtures"
    fixtures.mkdir()
    induce = []
    for _ in range(2):
        induce += [{"role": "proposer", "text": PROPOSAL}, {"role": "reviewer", "text": CRITIQUE}] * 2
        induce += [{"role": "voter", "text": vote(i)} for i in range(8) for _ in range(3)]
        induce += [{"role": "reviewer", "text": CRITIQUE}]
    (fixtures / "induce.json").write_text(json.dumps({"responses": induce}))
    assign = [{"role": "voter", "text": vote(i)} for i in range(20) for _ in range(3)]
    (fixtures / "assign.json").write_text(json.dumps({"responses": assign}))
    synth = []
    for _ in range(2):  # two models
        synth.append({"role": "evaluator", "text": INFERENCE})
        synth.append({"role": "scorer", "text": SCORER})
    (fixtures / "synth.json").write_text(json.dumps({"responses": synth}))

    config = {
        "corpus": "corpus.jsonl",
        "out": "out",
        "k": 3,
        "n_voters": 3,
        "seed": 11,
        "domain_description": "toy embodied tasks",
        "induction": {"max_inner_iters": 3, "max_outer_rounds": 3, "subsample_size": 8},
        "embedding": {"text_dim": 8, "image_dim": 6},
        "roles": {r: {"kind": "scripted"} for r in ("proposer", "reviewer", "voter", "evaluator", "scorer")},
        "scripted_fixtures": {s: f"fixtures/{s}.json" for s in ("induce", "assign", "synth")},
        "sandbox": {"kind": "local"},
        "synthesis": {"max_iterations": 3, "probe_size": 4},
        "models": [
            {"name": "alpha", "model_path": "mock://alpha"},
            {"name": "beta", "model_path": "mock://beta"},
        ],
        "bench_info": "toy benchmark, exact match scoring",
    }
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=1))
    return path


def main():
    with tempfile.TemporaryDirectory(prefix="evalforge-demo-") as tmp:
        root = Path(tmp)
        config_path = build_workspace(root)
        cfg = load_config(config_path)
        for stage in STAGES:
            outputs = run_stage(stage, cfg)
            print(f"stage {stage:<7} wrote {len(outputs)} artifact(s)")
        paths = artifact_paths(cfg)
        manifest = json.loads((cfg.out_dir / "manifests" / "sample.json").read_text())
        print(f"\nsample-stage manifest config hash: {manifest['config_hash']}")
        print("\n" + paths["report_text"].read_text())


if __name__ == "__main__":
    main()
