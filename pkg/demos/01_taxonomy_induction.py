#!/usr/bin/env python3
"""Walk through capability-taxonomy induction with scripted agent roles.

The proposer/reviewer loop runs against canned responses here, so the demo is
deterministic and network-free; swap the scripted backend for HTTP role
configs to run against live models.
"""

import json

from evalforge import (
    Critique,
    InductionConfig,
    InductionMemory,
    SourceBenchmarkInfo,
)
from evalforge.gateway import ScriptedBackend
from evalforge.induction import propose, review, run_induction
from tiny_world import make_assigner, toy_pool

INFOS = [
    SourceBenchmarkInfo("GridNav", "navigation puzzles on small grids", 30),
    SourceBenchmarkInfo("ObjCount", "counting objects in cluttered scenes", 30),
]

PROPOSAL = json.dumps(
    [
        {"name": "Spatial", "description": "Reasoning about positions and paths."},
        {"name": "Counting", "description": "Determining object quantities."},
    ]
)
CRITIQUE = json.dumps(
    {
        "specificity_feedback": "Both dimensions are domain-specific.",
        "minimality_feedback": "No conceptual overlap.",
        "balance_feedback": "",
    }
)


def scripted_roles():
    entries = []
    for _ in range(2):  # two outer rounds: the repeat triggers the fixed point
        for _ in range(2):  # two inner iterations reach the inner fixed point
            entries.append(("proposer", PROPOSAL))
            entries.append(("reviewer", CRITIQUE))
        entries.append(("reviewer", CRITIQUE))  # balance-informed critique
    backend = ScriptedBackend(entries)
    return {"proposer": backend.for_role("proposer"), "reviewer": backend.for_role("reviewer")}


def main():
    print("== one proposer call ==")
    roles = scripted_roles()
    dims = propose(roles["proposer"], INFOS, Critique(), InductionMemory())
    print(f"proposed dimensions: {list(dims.names)}")

    critique = review(roles["reviewer"], dims, None, domain_description="toy embodied tasks")
    print(f"reviewer critique: specificity={critique.specificity_feedback!r}")

    print("\n== full induction run ==")
    roles = scripted_roles()
    cfg = InductionConfig(max_inner_iters=4, max_outer_rounds=4, domain_description="toy tasks")
    final_dims, bench, trace = run_induction(
        roles, INFOS, toy_pool(20), cfg, make_assigner(k=4)
    )
    print(f"final taxonomy: {list(final_dims.names)}")
    print(f"stop reason:    {trace.stop_reason} (converged={trace.converged})")
    for i, round_record in enumerate(trace.rounds, start=1):
        stats = round_record.stats
        kept = {name: k for name, _, k in stats.per_dimension}
        print(f"round {i}: {round_record.inner_iterations} inner iterations, retained {kept}")
    print(f"memory entries: {len(trace.memory)} (one per completed inner iteration)")
    print(f"curated pool sizes: {[len(ids) for _, ids in bench.pools]}")


if __name__ == "__main__":
    main()
