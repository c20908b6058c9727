"""Corpus ingest and persistence.

The corpus is line-delimited JSON: one example per line with fields
``id, source, question, media[], answer, answer_kind, choices[]``. Benchmark
descriptions are not part of example records; they can be supplied as a
name -> description mapping at ingest time.
"""

from __future__ import annotations

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping
from urllib.parse import urlparse

from .domain import DomainError, Example, SourceBenchmarkInfo
from .jsonutil import atomic_write_text

log = logging.getLogger(__name__)


class CorpusFormat(str, Enum):
    JSONL = "jsonl"


class MissingMediaPolicy(str, Enum):
    FAIL = "fail"
    WARN_SKIP = "warn_skip"


class CorpusError(ValueError):
    """Raised for unparseable or inconsistent corpus files; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def media_resolvable(locator: str) -> bool:
    """A locator resolves if it is a mock:// reference, an http(s) URL, or an
    existing local path."""
    parsed = urlparse(locator)
    if parsed.scheme in ("mock", "http", "https"):
        return True
    return Path(locator).exists()


def ingest_corpus(
    path: str | Path,
    fmt: CorpusFormat = CorpusFormat.JSONL,
    *,
    descriptions: Mapping[str, str] | None = None,
    missing_media: MissingMediaPolicy = MissingMediaPolicy.FAIL,
) -> tuple[list[SourceBenchmarkInfo], list[Example]]:
    """Parse a corpus file into (source infos, examples).

    Examples are deduplicated by id (a duplicate is an error, not a merge);
    per-source example counts are derived from the surviving examples.
    """
    if fmt is not CorpusFormat.JSONL:
        raise CorpusError(f"unsupported corpus format: {fmt}")
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")

    examples: list[Example] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON ({exc.msg})", lineno) from exc
            try:
                example = Example.from_dict(record)
            except (KeyError, ValueError, TypeError, DomainError) as exc:
                missing = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                raise CorpusError(f"bad record: {missing}", lineno) from exc
            if example.id in seen_ids:
                raise CorpusError(f"duplicate example id {example.id!r}", lineno)

            unresolved = [m.locator for m in example.media if not media_resolvable(m.locator)]
            if unresolved:
                if missing_media is MissingMediaPolicy.FAIL:
                    raise CorpusError(
                        f"unresolvable media locator(s) {unresolved} for example {example.id!r}",
                        lineno,
                    )
                log.warning(
                    "skipping example %s: unresolvable media %s", example.id, unresolved
                )
                continue

            seen_ids.add(example.id)
            examples.append(example)

    descriptions = descriptions or {}
    counts: dict[str, int] = {}
    order: list[str] = []
    for ex in examples:
        if ex.source not in counts:
            counts[ex.source] = 0
            order.append(ex.source)
        counts[ex.source] += 1
    infos = [
        SourceBenchmarkInfo(
            name=name, description=descriptions.get(name, ""), example_count=counts[name]
        )
        for name in order
    ]
    return infos, examples


def write_corpus(examples: Iterable[Example], path: str | Path) -> None:
    """Serialize examples one per line; round-trips through ingest_corpus."""
    lines = [json.dumps(ex.to_dict(), sort_keys=True, ensure_ascii=False) for ex in examples]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
