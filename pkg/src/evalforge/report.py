"""Report assembly: ranking tables (with optional correlation blocks against
baseline score columns) and speedup tables, as structured documents plus
aligned plain-text renderings."""

from __future__ import annotations

from typing import Mapping, Sequence

from .metrics import MetricError, build_ranking_report, speedup
from .synthesis import EvaluationRun

OURS_LABEL = "ours"


def emit_report(
    runs: Sequence[EvaluationRun],
    baselines: Mapping[str, Mapping[str, float]] | None = None,
    timings: Mapping[str, tuple[float, float]] | None = None,
) -> dict:
    """Build the report document.

    Ranking rows are sorted by average descending (ties by model name).
    When baseline columns are given (label -> model -> score), a correlation
    block over all column pairs is appended; their model sets must match the
    runs exactly. Timings (model -> (source_hours, ours_hours)) add a speedup
    table.
    """
    if not runs:
        raise ValueError("at least one evaluation run is required")
    ordered = sorted(runs, key=lambda r: (-r.scorecard.average, r.model))
    models = [r.model for r in ordered]

    dim_order: list[str] = []
    for run in ordered:
        for name, _ in run.scorecard.per_dimension_scores:
            if name not in dim_order:
                dim_order.append(name)

    doc: dict = {
        "ranking": [
            {
                "model": run.model,
                "scores": run.scorecard.scores_dict(),
                "average": run.scorecard.average,
            }
            for run in ordered
        ],
        "dimension_order": dim_order,
    }

    if baselines:
        for label, column in baselines.items():
            missing = [m for m in models if m not in column]
            extra = [m for m in column if m not in models]
            if missing or extra:
                raise MetricError(
                    f"baseline {label!r} model names do not match runs "
                    f"(missing {missing}, unexpected {extra})"
                )
        columns: list[tuple[str, list[float]]] = [
            (OURS_LABEL, [run.scorecard.average for run in ordered])
        ]
        for label, column in baselines.items():
            columns.append((label, [float(column[m]) for m in models]))
        doc["correlations"] = build_ranking_report(models, columns).to_dict()

    if timings:
        rows = []
        for model, (source_hours, ours_hours) in timings.items():
            rows.append(
                {
                    "model": model,
                    "source_hours": source_hours,
                    "ours_hours": ours_hours,
                    "speedup": speedup(source_hours, ours_hours),
                }
            )
        doc["speedup"] = rows
    return doc


def _format_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i]) for i in range(len(header))]
    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)


def render_report_text(doc: Mapping) -> str:
    """Aligned plain-text rendering mirroring the structured document."""
    sections: list[str] = []

    dims: list[str] = list(doc.get("dimension_order", []))
    header = ["Model"] + dims + ["Avg"]
    rows = []
    for entry in doc["ranking"]:
        scores = entry["scores"]
        rows.append(
            [entry["model"]]
            + [f"{scores[d]:.2f}" if d in scores else "-" for d in dims]
            + [f"{entry['average']:.2f}"]
        )
    sections.append("== Ranking ==\n" + _format_table(header, rows))

    if "correlations" in doc:
        corr = doc["correlations"]
        rows = [
            [p["a"], p["b"], f"{p['spearman_rho']:.2f}", f"{p['kendall_tau']:.2f}"]
            for p in corr["pairwise"]
        ]
        sections.append(
            "== Ranking correlations ==\n"
            + _format_table(["A", "B", "Spearman rho", "Kendall tau"], rows)
        )

    if "speedup" in doc:
        rows = [
            [
                r["model"],
                f"{r['source_hours']:.1f}",
                f"{r['ours_hours']:.1f}",
                f"{r['speedup']:.1f}x",
            ]
            for r in doc["speedup"]
        ]
        sections.append(
            "== Evaluation time (hours) ==\n"
            + _format_table(["Model", "Source", "Ours", "S.D."], rows)
        )

    return "\n\n".join(sections) + "\n"
