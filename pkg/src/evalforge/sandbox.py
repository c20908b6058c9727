"""Execution requests/results for synthesized code, their JSON wire format, and
the executor implementations the synthesis loop can run against.

The wire format is the cross-process boundary shared with the standalone
worker: one request document in, one response document out, UTF-8, one JSON
document per line, canonical key order. See docs/sandbox-protocol.md.
"""

from __future__ import annotations

import subprocess
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Sequence

from .jsonutil import canonical_dumps

STATUS_OK = "ok"
STATUS_ERROR = "error"
STATUS_TIMEOUT = "timeout"
STATUS_RESOURCE_EXCEEDED = "resource_exceeded"
STATUSES = (STATUS_OK, STATUS_ERROR, STATUS_TIMEOUT, STATUS_RESOURCE_EXCEEDED)

TRACE_EXCERPT_LINES = 20


class SandboxError(RuntimeError):
    """Executor infrastructure failure (distinct from artifact execution errors,
    which are data on the ExecutionResult)."""


class SandboxProtocolError(SandboxError):
    pass


@dataclass(frozen=True)
class ExecutionLimits:
    timeout_seconds: float = 30.0
    memory_bytes: int = 512 * 1024 * 1024
    output_bytes: int = 1024 * 1024

    def __post_init__(self) -> None:
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be > 0")

    def to_dict(self) -> dict:
        return {
            "timeout_seconds": self.timeout_seconds,
            "memory_bytes": self.memory_bytes,
            "output_bytes": self.output_bytes,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExecutionLimits":
        return cls(
            timeout_seconds=d["timeout_seconds"],
            memory_bytes=d["memory_bytes"],
            output_bytes=d["output_bytes"],
        )


@dataclass(frozen=True)
class ExecutionRequest:
    """Code artifact + entry function + call payload. The payload is an object
    with an "args" list and an optional "kwargs" mapping."""

    code: str
    entry: str
    payload: Any
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)

    def __post_init__(self) -> None:
        if not self.entry:
            raise ValueError("entry function name must be non-empty")

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "entry": self.entry,
            "payload": self.payload,
            "limits": self.limits.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExecutionRequest":
        return cls(
            code=d["code"],
            entry=d["entry"],
            payload=d["payload"],
            limits=ExecutionLimits.from_dict(d["limits"]),
        )


@dataclass(frozen=True)
class Diagnostic:
    error_type: str
    message: str
    trace_excerpt: str = ""

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    def to_dict(self) -> dict:
        return {
            "error_type": self.error_type,
            "message": self.message,
            "trace_excerpt": self.trace_excerpt,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Diagnostic":
        return cls(
            error_type=d["error_type"],
            message=d["message"],
            trace_excerpt=d.get("trace_excerpt", ""),
        )

    def render(self) -> str:
        out = f"{self.error_type}: {self.message}"
        if self.trace_excerpt:
            out += f"\n{self.trace_excerpt}"
        return out


@dataclass(frozen=True)
class ExecutionResult:
    status: str
    result: Any = None
    diagnostic: Diagnostic | None = None
    wall_seconds: float = 0.0

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == STATUS_OK) != (self.diagnostic is None):
            raise ValueError("ok results carry no diagnostic; failures must carry one")

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "result": self.result,
            "diagnostic": self.diagnostic.to_dict() if self.diagnostic else None,
            "wall_seconds": self.wall_seconds,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExecutionResult":
        diag = d.get("diagnostic")
        return cls(
            status=d["status"],
            result=d.get("result"),
            diagnostic=Diagnostic.from_dict(diag) if diag else None,
            wall_seconds=d.get("wall_seconds", 0.0),
        )


def encode_request(req: ExecutionRequest) -> str:
    return canonical_dumps(req.to_dict())


def decode_request(line: str) -> ExecutionRequest:
    import json

    try:
        doc = json.loads(line)
        return ExecutionRequest.from_dict(doc)
    except (ValueError, KeyError, TypeError) as exc:
        raise SandboxProtocolError(f"malformed request document: {exc}") from exc


def encode_response(res: ExecutionResult) -> str:
    return canonical_dumps(res.to_dict())


def decode_response(line: str) -> ExecutionResult:
    import json

    try:
        doc = json.loads(line)
        if "protocol_error" in doc:
            raise SandboxProtocolError(f"worker protocol error: {doc['protocol_error']}")
        return ExecutionResult.from_dict(doc)
    except SandboxProtocolError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise SandboxProtocolError(f"malformed response document: {exc}") from exc


def payload_call(payload: Any) -> tuple[list, dict]:
    """Split a wire payload into (args, kwargs)."""
    if isinstance(payload, Mapping) and set(payload) <= {"args", "kwargs"} and "args" in payload:
        return list(payload["args"]), dict(payload.get("kwargs", {}))
    return [payload], {}


def tail_lines(text: str, n: int = TRACE_EXCERPT_LINES) -> str:
    lines = text.rstrip("\n").split("\n")
    return "\n".join(lines[-n:])


class SandboxExecutor(Protocol):
    def execute(self, req: ExecutionRequest) -> ExecutionResult: ...


class LocalExecutor:
    """In-process executor for trusted fixture artifacts.

    Runs the code in a fresh namespace and turns raised exceptions into
    diagnostics, but provides no resource isolation; the standalone worker is
    the isolated path. Intended for tests and desk-scale pipelines.
    """

    def execute(self, req: ExecutionRequest) -> ExecutionResult:
        start = time.perf_counter()
        namespace: dict[str, Any] = {}
        try:
            exec(compile(req.code, "<artifact>", "exec"), namespace)
            entry = namespace.get(req.entry)
            if not callable(entry):
                raise NameError(f"entry function {req.entry!r} not defined by artifact")
            args, kwargs = payload_call(req.payload)
            value = entry(*args, **kwargs)
            encoded = canonical_dumps({"result": value})
            if len(encoded.encode("utf-8")) > req.limits.output_bytes:
                return ExecutionResult(
                    status=STATUS_RESOURCE_EXCEEDED,
                    diagnostic=Diagnostic(
                        error_type="OutputCapExceeded",
                        message=f"result exceeds output cap of {req.limits.output_bytes} bytes",
                    ),
                    wall_seconds=time.perf_counter() - start,
                )
            return ExecutionResult(
                status=STATUS_OK, result=value, wall_seconds=time.perf_counter() - start
            )
        except MemoryError as exc:
            return ExecutionResult(
                status=STATUS_RESOURCE_EXCEEDED,
                diagnostic=Diagnostic(error_type="MemoryError", message=str(exc) or "MemoryError"),
                wall_seconds=time.perf_counter() - start,
            )
        except BaseException as exc:  # artifact faults become diagnostics
            return ExecutionResult(
                status=STATUS_ERROR,
                diagnostic=Diagnostic(
                    error_type=type(exc).__name__,
                    message=str(exc) or type(exc).__name__,
                    trace_excerpt=tail_lines(traceback.format_exc()),
                ),
                wall_seconds=time.perf_counter() - start,
            )


class ScriptedExecutor:
    """Canned results in call order; records the requests it served."""

    def __init__(self, results: Sequence[ExecutionResult]):
        self._results = list(results)
        self._cursor = 0
        self.requests: list[ExecutionRequest] = []

    def execute(self, req: ExecutionRequest) -> ExecutionResult:
        if self._cursor >= len(self._results):
            raise SandboxError("scripted executor exhausted")
        self.requests.append(req)
        result = self._results[self._cursor]
        self._cursor += 1
        return result


class WorkerClient:
    """Spawns one worker process per request and speaks the line protocol.

    The worker owns timeout enforcement; the client only applies a hard wait
    of timeout + grace as a backstop against a wedged worker.
    """

    GRACE_SECONDS = 2.0

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ValueError("worker command must be non-empty")
        self.command = tuple(command)

    def execute(self, req: ExecutionRequest) -> ExecutionResult:
        wire = encode_request(req) + "\n"
        deadline = req.limits.timeout_seconds + self.GRACE_SECONDS + 10.0
        try:
            proc = subprocess.run(
                list(self.command),
                input=wire.encode("utf-8"),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=deadline,
            )
        except FileNotFoundError as exc:
            raise SandboxError(f"worker command not found: {self.command[0]!r}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SandboxError(
                f"worker did not answer within {deadline}s (its own timeout handling failed)"
            ) from exc
        stdout = proc.stdout.decode("utf-8", errors="replace").strip()
        if not stdout:
            raise SandboxProtocolError(
                f"worker produced no response document (exit {proc.returncode}, "
                f"stderr: {proc.stderr.decode('utf-8', errors='replace')[-500:]!r})"
            )
        return decode_response(stdout.split("\n")[-1])
