"""The executing half of the worker: runs inside a disposable interpreter.

Reads an internal job document from stdin, applies the isolation measures
(address-space cap, no sockets, private temp dir, diverted stdio), executes
the artifact's entry function, and writes one internal result document to the
real stdout. The supervising parent translates that into a protocol response.
"""

from __future__ import annotations

import io
import json
import os
import sys
import tempfile
import traceback

from .protocol import payload_call, tail_lines


def _apply_limits(memory_bytes: int) -> None:
    if memory_bytes > 0:
        import resource

        try:
            resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))
        except (ValueError, OSError):
            pass  # caps above the hard limit are skipped, not fatal


def _block_network() -> None:
    import socket

    def _denied(*args, **kwargs):
        raise PermissionError("network access is disabled inside the sandbox")

    socket.socket = _denied  # type: ignore[misc]
    socket.create_connection = _denied  # type: ignore[assignment]
    socket.socketpair = _denied  # type: ignore[assignment]


def _isolate_filesystem() -> str:
    scratch = tempfile.mkdtemp(prefix="sandboxworker-")
    os.chdir(scratch)
    os.environ["TMPDIR"] = scratch
    tempfile.tempdir = scratch
    return scratch


def main() -> int:
    job = json.loads(sys.stdin.read())
    code: str = job["code"]
    entry: str = job["entry"]
    output_cap: int = job["limits"]["output_bytes"]

    # Keep a private handle on the true stdout, then divert fd 1 so artifact
    # prints (progress bars included) cannot corrupt the protocol stream.
    result_fd = os.dup(1)
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)
    os.dup2(devnull, 2)
    sys.stdout = io.TextIOWrapper(io.BytesIO(), encoding="utf-8")
    sys.stderr = io.TextIOWrapper(io.BytesIO(), encoding="utf-8")

    _apply_limits(job["limits"]["memory_bytes"])
    _block_network()
    _isolate_filesystem()

    try:
        namespace: dict = {"__name__": "__artifact__"}
        exec(compile(code, "<artifact>", "exec"), namespace)
        fn = namespace.get(entry)
        if not callable(fn):
            raise NameError(f"entry function {entry!r} not defined by artifact")
        args, kwargs = payload_call(job["payload"])
        value = fn(*args, **kwargs)
        try:
            rendered = json.dumps(value, ensure_ascii=False)
        except (TypeError, ValueError) as exc:
            raise TypeError(f"return value is not JSON-serializable: {exc}") from exc
        if output_cap > 0 and len(rendered.encode("utf-8")) > output_cap:
            doc = {
                "ok": False,
                "kind": "output_cap",
                "error_type": "OutputCapExceeded",
                "message": (
                    f"serialized result of {len(rendered.encode('utf-8'))} bytes "
                    f"exceeds the {output_cap}-byte cap"
                ),
                "trace": "",
            }
        else:
            doc = {"ok": True, "result": value}
    except MemoryError:
        doc = {
            "ok": False,
            "kind": "memory",
            "error_type": "MemoryError",
            "message": "artifact exceeded the memory cap",
            "trace": "",
        }
    except BaseException as exc:
        tb = exc.__traceback__
        if tb is not None and tb.tb_next is not None:
            tb = tb.tb_next  # drop this supervisor frame; artifact frames carry the cause
        trace = "".join(traceback.format_exception(type(exc), exc, tb))
        doc = {
            "ok": False,
            "kind": "error",
            "error_type": type(exc).__name__,
            "message": str(exc) or type(exc).__name__,
            "trace": tail_lines(trace),
        }

    os.write(result_fd, (json.dumps(doc, ensure_ascii=False) + "\n").encode("utf-8"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
