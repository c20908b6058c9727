"""Diversity-aware sampling: embedding, fixed-K clustering, and centroid-nearest
representative selection.

Embeddings are the concatenation of a text block and a visual block (zero for
text-only examples; videos contribute the mean of uniformly sampled frame
embeddings). Clustering is plain iterative centroid refinement with greedy
spread-out (farthest-point) seeding, which keeps the whole stage deterministic
for a fixed seed.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np
import requests

from .domain import BalanceStats, CuratedBenchmark, DimensionSet, Example, Provenance
from .jsonutil import atomic_write_bytes, canonical_dumps

log = logging.getLogger(__name__)


class SamplerError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Embedding backends


@dataclass(frozen=True)
class EmbeddingBackendConfig:
    text_endpoint: str = "mock"
    image_endpoint: str = "mock"
    text_dim: int = 384
    image_dim: int = 512
    max_frames: int = 32
    normalize_blocks: bool = False
    api_key_env: str = ""

    def __post_init__(self) -> None:
        if self.text_dim <= 0 or self.image_dim <= 0:
            raise SamplerError("embedding dims must be positive")
        if self.max_frames < 1:
            raise SamplerError("max_frames must be >= 1")

    @property
    def dim(self) -> int:
        return self.text_dim + self.image_dim

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_dumps(self.__dict__).encode()).hexdigest()[:16]


class EmbeddingBackend(Protocol):
    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, locator: str) -> np.ndarray: ...

    def embed_frame(self, locator: str, index: int) -> np.ndarray: ...


class MockEmbedding:
    """Seeded content-hash vectors: deterministic, network-free, fixed dims."""

    def __init__(self, cfg: EmbeddingBackendConfig):
        self.cfg = cfg

    def _vector(self, tag: str, content: str, dim: int) -> np.ndarray:
        digest = hashlib.sha256(f"{tag}\x00{content}".encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(dim)

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector("text", text, self.cfg.text_dim)

    def embed_image(self, locator: str) -> np.ndarray:
        return self._vector("image", locator, self.cfg.image_dim)

    def embed_frame(self, locator: str, index: int) -> np.ndarray:
        return self._vector("frame", f"{locator}#{index}", self.cfg.image_dim)


class HttpEmbedding:
    """Embeddings-endpoint client (OpenAI-style POST {input: ...} -> vector).
    The image endpoint must accept locator strings; frame requests append the
    frame index as a fragment."""

    def __init__(self, cfg: EmbeddingBackendConfig):
        self.cfg = cfg
        self._session = requests.Session()

    def _post(self, endpoint: str, payload: str, dim: int) -> np.ndarray:
        import os

        headers = {}
        if self.cfg.api_key_env:
            headers["Authorization"] = f"Bearer {os.environ.get(self.cfg.api_key_env, '')}"
        resp = self._session.post(
            endpoint.rstrip("/") + "/embeddings", json={"input": payload}, headers=headers, timeout=60
        )
        resp.raise_for_status()
        vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=float)
        if vec.shape != (dim,):
            raise SamplerError(f"endpoint returned dim {vec.shape}, expected ({dim},)")
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        return self._post(self.cfg.text_endpoint, text, self.cfg.text_dim)

    def embed_image(self, locator: str) -> np.ndarray:
        return self._post(self.cfg.image_endpoint, locator, self.cfg.image_dim)

    def embed_frame(self, locator: str, index: int) -> np.ndarray:
        return self._post(self.cfg.image_endpoint, f"{locator}#frame={index}", self.cfg.image_dim)


def make_embedding_backend(cfg: EmbeddingBackendConfig) -> EmbeddingBackend:
    if cfg.text_endpoint == "mock" and cfg.image_endpoint == "mock":
        return MockEmbedding(cfg)
    return HttpEmbedding(cfg)


def uniform_frame_indices(frame_count: int, max_frames: int) -> np.ndarray:
    """min(frame_count, max_frames) uniformly spaced frame indices."""
    if frame_count < 1:
        raise SamplerError("frame_count must be >= 1")
    n = min(frame_count, max_frames)
    if n == frame_count:
        return np.arange(frame_count)
    return np.round(np.linspace(0, frame_count - 1, n)).astype(int)


def _example_text(example: Example) -> str:
    parts = [example.question]
    if example.choices:
        parts.extend(example.choices)
    return "\n".join(parts)


def encode(
    example: Example, cfg: EmbeddingBackendConfig, backend: EmbeddingBackend | None = None
) -> np.ndarray:
    """Embed one example: text block + visual block (zeros when no media).

    Videos embed min(frame_count, max_frames) uniformly sampled frames and
    average them; multiple media items average their per-item vectors. The
    backend defaults to whatever the config selects (mock or HTTP).
    """
    backend = backend or make_embedding_backend(cfg)
    text_vec = np.asarray(backend.embed_text(_example_text(example)), dtype=float)
    if text_vec.shape != (cfg.text_dim,):
        raise SamplerError(f"text embedding dim {text_vec.shape} != ({cfg.text_dim},)")

    media_vecs: list[np.ndarray] = []
    for media in example.media:
        if media.kind == "image":
            media_vecs.append(np.asarray(backend.embed_image(media.locator), dtype=float))
        else:
            if media.frames is None:
                raise SamplerError(
                    f"example {example.id}: video {media.locator!r} has unknown frame count"
                )
            indices = uniform_frame_indices(media.frames, cfg.max_frames)
            frames = [
                np.asarray(backend.embed_frame(media.locator, int(i)), dtype=float)
                for i in indices
            ]
            media_vecs.append(np.mean(frames, axis=0))
    if media_vecs:
        visual_vec = np.mean(media_vecs, axis=0)
        if visual_vec.shape != (cfg.image_dim,):
            raise SamplerError(f"visual embedding dim {visual_vec.shape} != ({cfg.image_dim},)")
    else:
        visual_vec = np.zeros(cfg.image_dim)

    if cfg.normalize_blocks:
        for block in (text_vec, visual_vec):
            norm = np.linalg.norm(block)
            if norm > 0:
                block /= norm
    out = np.concatenate([text_vec, visual_vec])
    if not np.all(np.isfinite(out)):
        raise SamplerError(f"example {example.id}: non-finite embedding values")
    return out


def encode_pool(
    examples: Sequence[Example],
    cfg: EmbeddingBackendConfig,
    *,
    backend: EmbeddingBackend | None = None,
    cache_path: str | None = None,
) -> dict[str, np.ndarray]:
    """Encode many examples, reusing a binary sidecar cache keyed by example id
    and backend config hash."""
    backend = backend or make_embedding_backend(cfg)
    cached: dict[str, np.ndarray] = {}
    if cache_path is not None:
        try:
            cached = load_encodings(cache_path, expected_config_hash=cfg.config_hash())
        except (FileNotFoundError, SamplerError):
            cached = {}
    out: dict[str, np.ndarray] = {}
    dirty = False
    for ex in examples:
        if ex.id in cached:
            out[ex.id] = cached[ex.id]
        else:
            out[ex.id] = encode(ex, cfg, backend)
            dirty = True
    if cache_path is not None and dirty:
        save_encodings(out, cache_path, config_hash=cfg.config_hash())
    return out


# Binary sidecar: 8-byte header length, canonical-JSON header, float64 matrix
# bytes in header id order. Avoids zip timestamps so reruns are byte-identical.


def save_encodings(encodings: Mapping[str, np.ndarray], path: str, *, config_hash: str) -> None:
    ids = list(encodings.keys())
    if not ids:
        raise SamplerError("nothing to save")
    dim = len(encodings[ids[0]])
    header = canonical_dumps({"ids": ids, "dim": dim, "config_hash": config_hash}).encode("utf-8")
    matrix = np.stack([np.asarray(encodings[i], dtype=np.float64) for i in ids])
    if matrix.shape != (len(ids), dim):
        raise SamplerError("inconsistent embedding dims")
    atomic_write_bytes(path, struct.pack("<Q", len(header)) + header + matrix.tobytes())


def load_encodings(path: str, *, expected_config_hash: str | None = None) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise SamplerError(f"truncated encodings file: {path}")
    (hlen,) = struct.unpack("<Q", blob[:8])
    import json

    header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    if expected_config_hash is not None and header["config_hash"] != expected_config_hash:
        raise SamplerError("encodings cache was produced with a different backend config")
    ids, dim = header["ids"], header["dim"]
    matrix = np.frombuffer(blob[8 + hlen :], dtype=np.float64).reshape(len(ids), dim)
    return {i: matrix[k].copy() for k, i in enumerate(ids)}


def export_embeddings(encodings: Mapping[str, np.ndarray], path: str) -> None:
    """Flat TSV (id + components) for external projection or plotting tools."""
    lines = []
    for ex_id, vec in encodings.items():
        lines.append(ex_id + "\t" + "\t".join(repr(float(v)) for v in vec))
    from .jsonutil import atomic_write_text

    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Clustering


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray  # (k, dim)
    assignments: np.ndarray  # (n,) centroid index per point
    inertia: float
    iterations: int
    inertia_history: tuple[float, ...] = ()


def _nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # ties -> lowest centroid index
    return labels, d2


def _greedy_spread_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Farthest-point traversal: seeded first pick, then repeatedly take the
    point farthest from its nearest chosen seed."""
    first = int(rng.integers(len(points)))
    chosen = [first]
    min_d2 = ((points - points[first]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def fit_clusters(
    points: Sequence[np.ndarray] | np.ndarray, k: int, seed: int, *, max_iterations: int = 100
) -> ClusterModel:
    """Iterative centroid refinement with greedy spread-out seeding.

    Deterministic for fixed (points, k, seed). Empty clusters are reseeded to
    the point currently farthest from its assigned centroid, so exactly k
    centroids survive. Converges when assignments stabilize.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise SamplerError("points must be a non-empty 2-D array")
    if not np.all(np.isfinite(pts)):
        raise SamplerError("points contain non-finite values")
    if k < 1:
        raise SamplerError("k must be >= 1")
    if k > len(pts):
        raise SamplerError(f"k={k} exceeds point count {len(pts)}")

    rng = np.random.default_rng(seed)
    centroids = _greedy_spread_init(pts, k, rng)
    labels, d2 = _nearest(pts, centroids)
    history = [float(d2[np.arange(len(pts)), labels].sum())]
    iterations = 0
    for _ in range(max_iterations):
        iterations += 1
        new_centroids = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centroids[j] = pts[members].mean(axis=0)
        # Reseed empty clusters from points farthest from their own centroid.
        taken: set[int] = set()
        for j in range(k):
            if not (labels == j).any():
                dist_own = ((pts - new_centroids[labels]) ** 2).sum(axis=1)
                for idx in taken:
                    dist_own[idx] = -1.0
                far = int(np.argmax(dist_own))
                taken.add(far)
                new_centroids[j] = pts[far]
        centroids = new_centroids
        new_labels, d2 = _nearest(pts, centroids)
        history.append(float(d2[np.arange(len(pts)), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return ClusterModel(
        centroids=centroids,
        assignments=labels,
        inertia=history[-1],
        iterations=iterations,
        inertia_history=tuple(history),
    )


def select_representatives(
    pool: Sequence[tuple[str, np.ndarray]], k: int, seed: int
) -> list[str]:
    """Pick the id nearest each cluster centroid; pools of size <= k are
    retained whole. In-cluster ties break toward the lowest point index."""
    if len(pool) <= k:
        return [ex_id for ex_id, _ in pool]
    ids = [ex_id for ex_id, _ in pool]
    pts = np.asarray([vec for _, vec in pool], dtype=np.float64)
    model = fit_clusters(pts, k, seed)
    d2 = ((pts[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    selected: list[str] = []
    used: set[int] = set()
    for j in range(k):
        members = np.flatnonzero(model.assignments == j)
        if len(members):
            pick = int(members[np.argmin(d2[members, j])])
        else:
            # Degenerate geometry (duplicate points) can leave a cluster empty;
            # keep the output at exactly k distinct ids.
            free = np.asarray([i for i in range(len(ids)) if i not in used])
            pick = int(free[np.argmin(d2[free, j])])
        used.add(pick)
        selected.append(ids[pick])
    return selected


# ---------------------------------------------------------------------------
# Benchmark assembly


def project_balance(
    source_counts: Sequence[tuple[str, int]], other_count: int, k: int
) -> BalanceStats:
    """Fixed-K retention arithmetic: each dimension keeps min(count, k), the
    'other' bucket keeps nothing. Mirrors what assemble_benchmark produces
    without paying for embeddings or clustering."""
    if k < 1:
        raise SamplerError("k must be >= 1")
    return BalanceStats.from_counts(
        [(name, count, min(count, k)) for name, count in source_counts], other_count
    )


def assemble_benchmark(
    table,
    encodings: Mapping[str, np.ndarray],
    k: int,
    seed: int,
    *,
    run_id: str = "",
    config_hash: str = "",
) -> CuratedBenchmark:
    """Per-dimension representative selection over an AssignmentTable, dropping
    the 'other' pool and recording balance statistics."""
    dims: DimensionSet = table.dimension_set
    pools: list[tuple[str, tuple[str, ...]]] = []
    counts: list[tuple[str, int, int]] = []
    for idx, name in enumerate(dims.names):
        ids = table.dimension_pools.get(name, [])
        missing = [i for i in ids if i not in encodings]
        if missing:
            raise SamplerError(f"dimension {name!r}: missing encodings for {missing[:5]}")
        member_pool = [(i, encodings[i]) for i in ids]
        kept = select_representatives(member_pool, k, seed + idx) if member_pool else []
        pools.append((name, tuple(kept)))
        counts.append((name, len(ids), len(kept)))
    stats = BalanceStats.from_counts(counts, other_count=len(table.other_pool))
    return CuratedBenchmark(
        dimension_set=dims,
        pools=tuple(pools),
        stats=stats,
        provenance=Provenance(run_id=run_id, config_hash=config_hash),
    )


def benchmark_similarity(
    a: Sequence[np.ndarray] | np.ndarray, b: Sequence[np.ndarray] | np.ndarray
) -> float:
    """Cosine similarity of the two mean embedding vectors."""
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.size == 0 or vb.size == 0:
        raise SamplerError("both embedding sets must be non-empty")
    ma, mb = va.mean(axis=0), vb.mean(axis=0)
    na, nb = np.linalg.norm(ma), np.linalg.norm(mb)
    if na == 0 or nb == 0:
        raise SamplerError("zero-norm mean vector")
    return float(np.dot(ma, mb) / (na * nb))
