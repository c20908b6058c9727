"""Independent reference implementations used to freeze expected test values.

These deliberately use different code paths from the library: explicit pair
enumeration, the closed-form tie-free Spearman formula, frequency argmax with
the documented tie rule, and exhaustive partition search for clustering.
"""

from __future__ import annotations

import math
from collections import Counter
from itertools import combinations
from typing import Sequence

import numpy as np


def tau_b_pair_enumeration(a: Sequence[float], b: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b via O(n^2) concordant/discordant counting."""
    n = len(a)
    concordant = discordant = 0
    for i, j in combinations(range(n), 2):
        s = (a[i] - a[j]) * (b[i] - b[j])
        if s > 0:
            concordant += 1
        elif s < 0:
            discordant += 1
    n0 = n * (n - 1) / 2
    n1 = sum(t * (t - 1) / 2 for t in Counter(a).values())
    n2 = sum(t * (t - 1) / 2 for t in Counter(b).values())
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        raise ZeroDivisionError("degenerate input")
    return (concordant - discordant) / denom


def spearman_tie_free(a: Sequence[float], b: Sequence[float]) -> float:
    """1 - 6*sum(d^2)/(n(n^2-1)); valid only when both lists are tie-free."""
    n = len(a)
    rank = lambda xs: {v: r for r, v in enumerate(sorted(xs), start=1)}
    ra, rb = rank(a), rank(b)
    d2 = sum((ra[x] - rb[y]) ** 2 for x, y in zip(a, b))
    return 1 - 6 * d2 / (n * (n * n - 1))


def majority_with_tie_rule(labels: Sequence[str], dim_order: Sequence[str]) -> str:
    """Frequency argmax; ties resolved by earliest dimension in canonical order,
    'other' losing every tie against a real dimension."""
    counts = Counter(labels)
    top = max(counts.values())
    tied = sorted(
        (label for label, c in counts.items() if c == top),
        key=lambda l: dim_order.index(l) if l in dim_order else len(dim_order),
    )
    return tied[0]


def iter_partitions(n: int, max_parts: int):
    """All partitions of range(n) into at most max_parts non-empty unlabeled
    parts, as restricted-growth label vectors."""
    labels = [0] * n
    while True:
        yield labels.copy()
        i = n - 1
        while i > 0:
            cap = min(max(labels[:i]) + 1, max_parts - 1)
            if labels[i] < cap:
                labels[i] += 1
                for j in range(i + 1, n):
                    labels[j] = 0
                break
            i -= 1
        else:
            return


def partition_matrix(n: int, max_parts: int) -> np.ndarray:
    return np.asarray(list(iter_partitions(n, max_parts)), dtype=np.int64)


def best_partition_sse(points: np.ndarray, k: int) -> tuple[float, np.ndarray]:
    """Exhaustive minimum-SSE clustering into at most k parts (vectorized over
    every candidate partition). Returns (sse, labels of the first optimum)."""
    n = len(points)
    parts = partition_matrix(n, k)  # (P, n)
    onehot = parts[:, :, None] == np.arange(k)[None, None, :]  # (P, n, k)
    counts = onehot.sum(axis=1).astype(float)  # (P, k)
    sums = np.einsum("pnk,nd->pkd", onehot.astype(float), points)  # (P, k, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.where(counts > 0, (sums**2).sum(axis=2) / counts, 0.0)  # (P, k)
    total = float((points**2).sum())
    sse = total - sq.sum(axis=1)  # (P,)
    best = int(np.argmin(sse))
    return float(sse[best]), parts[best]


def nearest_to_centroid_picks(points: np.ndarray, labels: np.ndarray, k: int) -> list[int]:
    """Per non-empty cluster, the lowest-index member nearest its centroid."""
    picks: list[int] = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if len(members) == 0:
            continue
        centroid = points[members].mean(axis=0)
        d2 = ((points[members] - centroid) ** 2).sum(axis=1)
        picks.append(int(members[np.argmin(d2)]))
    return picks


def clustering_sse(points: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for j in np.unique(labels):
        members = points[labels == j]
        centroid = members.mean(axis=0)
        total += float(((members - centroid) ** 2).sum())
    return total


def blob_pool(rng: np.random.Generator, n: int, k: int, dim: int) -> np.ndarray:
    """Well-separated blob instance: k centers at pairwise distance >= 10 with
    point spread sigma = 0.35, so the optimal clustering is the blob partition
    and farthest-point-seeded refinement reaches it."""
    while True:
        centers = rng.uniform(-50, 50, size=(k, dim))
        if k == 1:
            break
        gaps = [
            np.linalg.norm(centers[i] - centers[j]) for i, j in combinations(range(k), 2)
        ]
        if min(gaps) >= 10.0:
            break
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    points = []
    for center, size in zip(centers, sizes):
        points.append(center + 0.35 * rng.standard_normal((size, dim)))
    pts = np.concatenate(points)
    order = rng.permutation(n)
    return pts[order]
