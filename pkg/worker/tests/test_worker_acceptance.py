"""Acceptance suite for the worker: protocol conformance and cross-boundary
integration, one PASS/FAIL line per criterion."""

from __future__ import annotations

import json
import time
from pathlib import Path

import pytest

from sandboxworker.protocol import canonical_dumps

from .test_worker_execute import call_worker, request
from .test_worker_integration import (
    BROKEN_SCORER,
    GOOD_SCORER,
    WORKER_COMMAND,
    config,
    predictions,
    probes,
)

FIXTURES = Path(__file__).resolve().parents[2] / "docs" / "fixtures"


class _Criterion:
    def __init__(self, number: int, label: str, budget_seconds: float):
        self.number = number
        self.label = label
        self.budget = budget_seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        print(
            f"[{status}] criterion {self.number}: {self.label} "
            f"[{elapsed:.2f}s / budget {self.budget:.0f}s]"
        )
        if exc_type is None and elapsed >= self.budget:
            raise AssertionError(f"criterion {self.number} exceeded {self.budget}s")
        return False


def test_criterion_9_sandbox_protocol_conformance():
    with _Criterion(9, "sandbox protocol conformance", 30.0):
        # golden fixtures round-trip bit-exactly
        for name in sorted(p.name for p in FIXTURES.glob("*.json")):
            raw = (FIXTURES / name).read_text(encoding="utf-8")
            assert canonical_dumps(json.loads(raw)) + "\n" == raw, name

        # identity artifact returns its payload
        rc, out, _ = call_worker((FIXTURES / "request_identity.json").read_text())
        doc = json.loads(out)
        assert rc == 0 and doc["status"] == "ok" and doc["result"] == {"echo": [1, 2, 3]}

        # raising artifact yields a non-empty diagnostic with error_type
        rc, out, _ = call_worker((FIXTURES / "request_raising.json").read_text())
        doc = json.loads(out)
        assert doc["status"] == "error"
        assert doc["diagnostic"]["error_type"] and doc["diagnostic"]["message"]

        # busy loop at timeout=2 -> status timeout, wall_seconds in [2, 4]
        line = request("def spin(x):\n    while True:\n        pass", "spin", [0], timeout=2.0)
        doc = json.loads(call_worker(line, timeout=15.0)[1])
        assert doc["status"] == "timeout"
        assert 2.0 <= doc["wall_seconds"] <= 4.0

        # over-cap output -> resource_exceeded
        line = request("def big(x):\n    return 'z' * 100000", "big", [0], output=512)
        doc = json.loads(call_worker(line)[1])
        assert doc["status"] == "resource_exceeded"


def test_criterion_10_cross_boundary_integration():
    pytest.importorskip("evalforge")
    from evalforge.gateway import ScriptedBackend
    from evalforge.sandbox import WorkerClient
    from evalforge.synthesis import synthesize_scoring

    with _Criterion(10, "synthesis loop against the real worker", 60.0):
        good = ScriptedBackend([("scorer", f"```python\n{GOOD_SCORER}```")])
        artifact = synthesize_scoring(
            good.for_role("scorer"),
            probes(),
            predictions(),
            "integration bench",
            WorkerClient(WORKER_COMMAND),
            config(),
        )
        assert artifact.validated and artifact.iterations_used == 1

        fixed = ScriptedBackend(
            [
                ("scorer", f"```python\n{BROKEN_SCORER}```"),
                ("scorer", f"```python\n{GOOD_SCORER}```"),
            ]
        )
        artifact = synthesize_scoring(
            fixed.for_role("scorer"),
            probes(),
            predictions(),
            "integration bench",
            WorkerClient(WORKER_COMMAND),
            config(),
        )
        assert artifact.validated and artifact.iterations_used == 2
