"""Supervising shim: one request in, one response out, no matter what the
executing interpreter does."""

from __future__ import annotations

import ast
import json
import os
import signal
import subprocess
import sys
import time

from .protocol import (
    STATUS_ERROR,
    STATUS_OK,
    STATUS_RESOURCE_EXCEEDED,
    STATUS_TIMEOUT,
    ProtocolError,
    canonical_dumps,
    parse_request,
    protocol_error_doc,
    response,
    tail_lines,
)

GRACE_SECONDS = 2.0


def lint_exception_handling(code: str) -> list[str]:
    """Generated artifacts are asked not to handle exceptions themselves;
    violations are flagged but never rejected."""
    try:
        tree = ast.parse(code)
    except SyntaxError:
        return []  # execution will surface the real diagnostic
    warnings = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Try):
            warnings.append(
                f"artifact contains a try/except block at line {node.lineno}; "
                "generated code is expected to let failures propagate"
            )
    return warnings


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.wait(timeout=GRACE_SECONDS)
    except subprocess.TimeoutExpired:
        pass


def execute(request: dict) -> dict:
    """Run one validated request in a fresh interpreter; always returns a
    response document."""
    for warning in lint_exception_handling(request["code"]):
        print(f"warning: {warning}", file=sys.stderr)

    timeout = request["limits"]["timeout_seconds"]
    start = time.monotonic()
    proc = subprocess.Popen(
        [sys.executable, "-m", "sandboxworker.child"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        start_new_session=True,  # own process group, so the whole tree dies together
    )
    try:
        out, err = proc.communicate(json.dumps(request).encode("utf-8"), timeout=timeout)
    except subprocess.TimeoutExpired:
        _kill_tree(proc)
        wall = time.monotonic() - start
        return response(
            STATUS_TIMEOUT,
            error_type="Timeout",
            message=f"execution exceeded the {timeout}s budget",
            wall_seconds=wall,
        )
    wall = time.monotonic() - start

    line = out.decode("utf-8", errors="replace").strip().split("\n")[-1] if out.strip() else ""
    if not line:
        stderr_tail = tail_lines(err.decode("utf-8", errors="replace")) if err else ""
        return response(
            STATUS_ERROR,
            error_type="InterpreterDied",
            message=f"executing interpreter produced no result (exit code {proc.returncode})",
            trace_excerpt=stderr_tail,
            wall_seconds=wall,
        )
    try:
        doc = json.loads(line)
    except json.JSONDecodeError:
        return response(
            STATUS_ERROR,
            error_type="InterpreterDied",
            message="executing interpreter produced an unreadable result",
            trace_excerpt=line[-500:],
            wall_seconds=wall,
        )
    if doc.get("ok"):
        return response(STATUS_OK, result=doc.get("result"), wall_seconds=wall)
    status = {
        "memory": STATUS_RESOURCE_EXCEEDED,
        "output_cap": STATUS_RESOURCE_EXCEEDED,
    }.get(doc.get("kind"), STATUS_ERROR)
    return response(
        status,
        error_type=doc.get("error_type", "Error"),
        message=doc.get("message", "unknown failure"),
        trace_excerpt=doc.get("trace", ""),
        wall_seconds=wall,
    )


def main() -> int:
    line = sys.stdin.readline()
    try:
        if not line.strip():
            raise ProtocolError("malformed request document: empty input")
        request = parse_request(line)
    except ProtocolError as exc:
        print(canonical_dumps(protocol_error_doc(str(exc))))
        return 2
    print(canonical_dumps(execute(request)))
    return 0
