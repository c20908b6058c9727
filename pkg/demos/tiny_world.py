"""Shared toy corpus and helpers for the demo scripts."""

from __future__ import annotations

import json

from evalforge import AnswerKind, Example, MediaRef
from evalforge.assignment import build_assignment
from evalforge.gateway import ScriptedBackend
from evalforge.sampler import EmbeddingBackendConfig, assemble_benchmark, encode_pool

DIM_NAMES = ("Spatial", "Counting")


def toy_pool(n: int = 20) -> list[Example]:
    pool = []
    for i in range(n):
        spatial = i % 2 == 0
        media = (MediaRef("video", f"mock://clip/{i}", frames=12),) if i % 5 == 0 else ()
        pool.append(
            Example(
                id=f"t{i:02d}",
                source="GridNav" if spatial else "ObjCount",
                question=(
                    f"which cell is left of cell {i}?" if spatial else f"how many blocks in pile {i}?"
                ),
                media=media,
                answer=f"gold-{i}",
                answer_kind=AnswerKind.EXACT_TEXT,
            )
        )
    return pool


def scripted_voters(pool: list[Example], n_voters: int = 3) -> ScriptedBackend:
    """Unanimous voters that label evens Spatial and odds Counting."""
    entries = []
    for example in pool:
        label = DIM_NAMES[int(example.id[1:]) % 2]
        for _ in range(n_voters):
            entries.append(("voter", json.dumps({"name": label, "reason": "keyword match"})))
    return ScriptedBackend(entries)


def make_assigner(k: int = 4, n_voters: int = 3):
    """Assignment + sampling closure as run_induction expects."""
    emb = EmbeddingBackendConfig(text_dim=12, image_dim=8)

    def assigner(subpool, dims):
        backend = scripted_voters(subpool, n_voters).for_role("voter")
        table = build_assignment(backend, subpool, dims, n_voters)
        encodings = encode_pool(subpool, emb)
        return assemble_benchmark(table, encodings, k, seed=7)

    return assigner
