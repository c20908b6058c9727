"""Wire-protocol documents: canonical serialization and request validation.

The normative description lives in docs/sandbox-protocol.md; this module and
the orchestrator's client each implement it independently, pinned by the
shared golden fixtures.
"""

from __future__ import annotations

import json
from typing import Any

STATUS_OK = "ok"
STATUS_ERROR = "error"
STATUS_TIMEOUT = "timeout"
STATUS_RESOURCE_EXCEEDED = "resource_exceeded"

TRACE_EXCERPT_LINES = 20


class ProtocolError(ValueError):
    pass


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_request(line: str) -> dict:
    """Validate a request line into {code, entry, payload, limits} with typed
    limit fields; raises ProtocolError on any malformation."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed request document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("malformed request document: not a JSON object")
    missing = [key for key in ("code", "entry", "payload", "limits") if key not in doc]
    if missing:
        raise ProtocolError(f"malformed request document: missing field(s) {missing}")
    if not isinstance(doc["code"], str) or not isinstance(doc["entry"], str) or not doc["entry"]:
        raise ProtocolError("malformed request document: code/entry must be non-empty strings")
    limits = doc["limits"]
    if not isinstance(limits, dict):
        raise ProtocolError("malformed request document: limits must be an object")
    try:
        timeout = float(limits["timeout_seconds"])
        memory = int(limits["memory_bytes"])
        output = int(limits["output_bytes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed request document: bad limits ({exc})") from exc
    if timeout <= 0:
        raise ProtocolError("malformed request document: timeout_seconds must be > 0")
    return {
        "code": doc["code"],
        "entry": doc["entry"],
        "payload": doc["payload"],
        "limits": {"timeout_seconds": timeout, "memory_bytes": memory, "output_bytes": output},
    }


def payload_call(payload: Any) -> tuple[list, dict]:
    if isinstance(payload, dict) and set(payload) <= {"args", "kwargs"} and "args" in payload:
        return list(payload["args"]), dict(payload.get("kwargs", {}))
    return [payload], {}


def response(
    status: str,
    *,
    result: Any = None,
    error_type: str = "",
    message: str = "",
    trace_excerpt: str = "",
    wall_seconds: float = 0.0,
) -> dict:
    diagnostic = None
    if status != STATUS_OK:
        diagnostic = {
            "error_type": error_type,
            "message": message or error_type or "unknown failure",
            "trace_excerpt": trace_excerpt,
        }
    return {
        "status": status,
        "result": result,
        "diagnostic": diagnostic,
        "wall_seconds": wall_seconds,
    }


def protocol_error_doc(message: str) -> dict:
    return {"protocol_error": message}


def tail_lines(text: str, n: int = TRACE_EXCERPT_LINES) -> str:
    lines = text.rstrip("\n").split("\n")
    return "\n".join(lines[-n:])
