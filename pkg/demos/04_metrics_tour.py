#!/usr/bin/env python3
"""Tour of the reporting statistics on small worked inputs: rank correlations,
agreement coefficients, fidelity, compression, and speedup."""

from evalforge import (
    BalanceStats,
    ModelScorecard,
    build_fidelity_report,
    cohen_kappa,
    compression_ratio,
    fleiss_kappa,
    inference_fidelity,
    kendall_tau,
    score_fidelity,
    spearman_rho,
    speedup,
)

# Three score columns over the same six models (higher is better).
OURS = [71.2, 68.4, 66.0, 61.3, 55.2, 41.8]
SOURCE = [66.1, 67.0, 60.2, 58.8, 56.0, 40.1]
HUMAN = [80.0, 74.5, 70.1, 66.6, 60.2, 50.3]


def main():
    print("== rank correlations ==")
    print(f"rho(ours, human)   = {spearman_rho(OURS, HUMAN):+.3f}")
    print(f"tau(ours, human)   = {kendall_tau(OURS, HUMAN):+.3f}")
    print(f"rho(ours, source)  = {spearman_rho(OURS, SOURCE):+.3f}")
    print(f"tau(ours, source)  = {kendall_tau(OURS, SOURCE):+.3f}")

    print("\n== agreement ==")
    auto = ["Spatial", "Counting", "Spatial", "Spatial", "Counting", "other"]
    human = ["Spatial", "Counting", "Spatial", "Counting", "Counting", "other"]
    print(f"cohen kappa (auto vs human labels) = {cohen_kappa(auto, human):+.3f}")
    ratings = [[5, 0], [4, 1], [0, 5], [1, 4], [5, 0]]
    print(f"fleiss kappa (5 raters, 2 classes) = {fleiss_kappa(ratings):+.3f}")

    print("\n== fidelity ==")
    print(f"edit-distance fidelity('abc' vs 'abd') = {inference_fidelity(['abc'], ['abd']):.2f}%")
    print(f"score fidelity (45 vs 50)              = {score_fidelity(45.0, 50.0):.3f}")
    agent = ModelScorecard.from_scores("agent", {"Spatial": 80.0, "Counting": 58.0})
    ref = ModelScorecard.from_scores("reference", {"Spatial": 82.0, "Counting": 60.0})
    report = build_fidelity_report(agent, ref)
    print(f"per-dimension fidelity = {report.rendered_per_dimension()}")
    print(f"overall fidelity       = {report.final:.2f}%")

    print("\n== compression and speedup ==")
    stats = BalanceStats.from_counts(
        [("Spatial", 900, 120), ("Counting", 350, 120)], other_count=4
    )
    print(f"compression ratio = {compression_ratio(stats):.3f}")
    print(f"speedup 412.9h -> 89.4h = {speedup(412.9, 89.4)}x")
    print(f"speedup 2.4h  -> 0.7h  = {speedup(2.4, 0.7)}x")


if __name__ == "__main__":
    main()
