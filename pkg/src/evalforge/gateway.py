"""Chat-backend access for the five agent roles.

Prompt bodies ship as resource files and are rendered by substituting
``{slot}`` / ``${slot}`` markers (with ``{{``/``}}`` escaping literal braces).
Responses are parsed by schema-specific extractors that tolerate surrounding
prose but are strict about the payload itself.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Iterator, Mapping, Protocol

import requests

from .domain import Critique

ROLES = ("proposer", "reviewer", "voter", "evaluator", "scorer")


class GatewayError(RuntimeError):
    pass


class TemplateError(GatewayError):
    pass


class ExtractionError(GatewayError):
    pass


class BackendError(GatewayError):
    """Transport-level or exhausted-retries failure talking to a chat backend."""


class AuthError(BackendError):
    pass


class ScriptExhaustedError(BackendError):
    pass


# ---------------------------------------------------------------------------
# Templates


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    body: str

    def slots(self) -> tuple[str, ...]:
        seen: list[str] = []
        for _, name in _iter_tokens(self.body):
            if name is not None and name not in seen:
                seen.append(name)
        return tuple(seen)


_TOKEN_RE = re.compile(r"\{\{|\}\}|\$?\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _iter_tokens(body: str) -> Iterator[tuple[str, str | None]]:
    """Yield (literal text, None) and ("", slot name) pieces in body order."""
    pos = 0
    for m in _TOKEN_RE.finditer(body):
        if m.start() > pos:
            yield body[pos : m.start()], None
        tok = m.group(0)
        if tok == "{{":
            yield "{", None
        elif tok == "}}":
            yield "}", None
        else:
            yield "", m.group(1)
        pos = m.end()
    if pos < len(body):
        yield body[pos:], None


def load_template(role: str) -> PromptTemplate:
    if role not in ROLES:
        raise TemplateError(f"unknown role {role!r}; expected one of {ROLES}")
    body = resources.files("evalforge.prompts").joinpath(f"{role}.txt").read_text("utf-8")
    return PromptTemplate(role=role, body=body)


def load_all_templates() -> dict[str, PromptTemplate]:
    return {role: load_template(role) for role in ROLES}


def render(template: PromptTemplate, slots: Mapping[str, str]) -> str:
    """Substitute every slot marker; pure, byte-stable for identical inputs."""
    wanted = set(template.slots())
    unknown = sorted(set(slots) - wanted)
    if unknown:
        raise TemplateError(
            f"{template.role}: bindings for nonexistent slot(s) {unknown}; template has {sorted(wanted)}"
        )
    missing = sorted(wanted - set(slots))
    if missing:
        raise TemplateError(f"{template.role}: missing binding(s) for slot(s) {missing}")
    parts: list[str] = []
    for literal, name in _iter_tokens(template.body):
        parts.append(slots[name] if name is not None else literal)
    return "".join(parts)


# ---------------------------------------------------------------------------
# Backends


@dataclass(frozen=True)
class BackendConfig:
    base_url: str
    model_name: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    system_prompt: str = ""
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class ChatBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


class RateLimiter:
    """Sliding-window limiter: never more than ``max_requests`` acquisitions per
    ``interval`` seconds across all concurrent callers."""

    def __init__(self, max_requests: int, interval: float):
        if max_requests < 1 or interval <= 0:
            raise ValueError("max_requests >= 1 and interval > 0 required")
        self.max_requests = max_requests
        self.interval = interval
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                while self._stamps and now - self._stamps[0] >= self.interval:
                    self._stamps.popleft()
                if len(self._stamps) < self.max_requests:
                    self._stamps.append(now)
                    return
                wait = self.interval - (now - self._stamps[0])
            time.sleep(max(wait, 1e-4))


class HttpBackend:
    """OpenAI-compatible chat-completions client: one system/user pair per call,
    exponential backoff on transport errors, no retry on auth failure."""

    def __init__(self, cfg: BackendConfig, limiter: RateLimiter | None = None):
        self.cfg = cfg
        self.limiter = limiter
        self._session = requests.Session()

    def complete(self, prompt: str) -> str:
        cfg = self.cfg
        api_key = os.environ.get(cfg.api_key_env, "")
        if not api_key:
            raise AuthError(f"credential env var {cfg.api_key_env!r} is unset or empty")
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": cfg.model_name,
            "temperature": cfg.temperature,
            "messages": [
                {"role": "system", "content": cfg.system_prompt},
                {"role": "user", "content": prompt},
            ],
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        last_exc: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            if self.limiter is not None:
                self.limiter.acquire()
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=cfg.timeout)
                if resp.status_code in (401, 403):
                    raise AuthError(f"auth failure ({resp.status_code}) from {url}")
                resp.raise_for_status()
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except AuthError:
                raise
            except (requests.RequestException, KeyError, ValueError, IndexError) as exc:
                last_exc = exc
                if attempt < cfg.max_retries:
                    time.sleep(cfg.backoff_base * (2**attempt))
        raise BackendError(
            f"chat completion failed after {cfg.max_retries + 1} attempt(s): {last_exc}"
        )


class ScriptedBackend:
    """Deterministic test double: canned responses consumed per role in order.

    The script is an ordered list of {"role", "text"} entries; ``for_role``
    returns a ChatBackend view that pops that role's queue. Consuming past the
    end of a role's queue is an error.
    """

    def __init__(self, entries: list[tuple[str, str]]):
        self._queues: dict[str, deque[str]] = {role: deque() for role in ROLES}
        for role, text in entries:
            if role not in self._queues:
                raise ValueError(f"unknown role {role!r} in script")
            self._queues[role].append(text)
        self.calls: list[tuple[str, str]] = []  # (role, prompt) in consumption order
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls([(e["role"], e["text"]) for e in doc["responses"]])

    def remaining(self, role: str) -> int:
        return len(self._queues[role])

    def complete_for(self, role: str, prompt: str) -> str:
        with self._lock:
            queue = self._queues[role]
            if not queue:
                raise ScriptExhaustedError(f"script exhausted for role {role!r}")
            self.calls.append((role, prompt))
            return queue.popleft()

    def for_role(self, role: str) -> "_ScriptedRoleView":
        if role not in self._queues:
            raise ValueError(f"unknown role {role!r}")
        return _ScriptedRoleView(self, role)


@dataclass
class _ScriptedRoleView:
    backend: ScriptedBackend
    role: str

    def complete(self, prompt: str) -> str:
        return self.backend.complete_for(self.role, prompt)


def complete(cfg: BackendConfig, prompt: str) -> str:
    """One-shot convenience wrapper around HttpBackend."""
    return HttpBackend(cfg).complete(prompt)


# ---------------------------------------------------------------------------
# Structured extraction

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.S)


def _json_payloads(text: str) -> list[Any]:
    """All non-overlapping top-level JSON values embedded in the text."""
    candidates: list[Any] = []
    decoder = json.JSONDecoder()
    # Prefer fenced content when present: models often wrap JSON in code fences.
    segments = _FENCE_RE.findall(text) or [text]
    for segment in segments:
        pos = 0
        while pos < len(segment):
            ch = segment[pos]
            if ch in "{[":
                try:
                    value, end = decoder.raw_decode(segment, pos)
                except json.JSONDecodeError:
                    pos += 1
                    continue
                candidates.append(value)
                pos = end
            else:
                pos += 1
    return candidates


def _as_dimension_list(value: Any) -> list[tuple[str, str]] | None:
    if isinstance(value, dict) and isinstance(value.get("dimensions"), list):
        value = value["dimensions"]
    if isinstance(value, dict):
        value = [value]
    if not isinstance(value, list) or not value:
        return None
    out: list[tuple[str, str]] = []
    for item in value:
        if not isinstance(item, dict):
            return None
        name, desc = item.get("name"), item.get("description")
        if not isinstance(name, str) or not name.strip() or not isinstance(desc, str):
            return None
        out.append((name, desc))
    return out


def _as_critique(value: Any) -> Critique | None:
    keys = ("specificity_feedback", "minimality_feedback", "balance_feedback")
    if isinstance(value, dict) and all(isinstance(value.get(k), str) for k in keys):
        return Critique(*(value[k] for k in keys))
    return None


def _as_vote(value: Any) -> tuple[str, str] | None:
    if (
        isinstance(value, dict)
        and isinstance(value.get("name"), str)
        and value["name"].strip()
        and isinstance(value.get("reason"), str)
    ):
        return value["name"], value["reason"]
    return None


_SCHEMA_PARSERS: dict[str, Callable[[Any], Any]] = {
    "dimension_list": _as_dimension_list,
    "critique": _as_critique,
    "vote": _as_vote,
}


def extract_structured(
    text: str, schema: str, *, valid_labels: set[str] | None = None
) -> Any:
    """Parse a raw model response into the value the given schema describes.

    Schemas: ``dimension_list`` -> list of (name, description); ``critique`` ->
    Critique; ``vote`` -> (name, reason); ``code_block`` -> contents of the one
    fenced block. ``valid_labels`` (normalized) makes vote extraction reject
    labels outside the set.
    """
    if schema == "code_block":
        blocks = _FENCE_RE.findall(text)
        if not blocks:
            raise ExtractionError("no fenced code block in response")
        if len(blocks) > 1:
            raise ExtractionError(f"expected exactly one fenced code block, found {len(blocks)}")
        return blocks[0].rstrip("\n")

    parser = _SCHEMA_PARSERS.get(schema)
    if parser is None:
        raise ExtractionError(f"unknown extraction schema {schema!r}")
    payloads = _json_payloads(text)
    if not payloads:
        raise ExtractionError(f"no parseable JSON payload in response for schema {schema!r}")
    for payload in payloads:
        parsed = parser(payload)
        if parsed is not None:
            if schema == "vote" and valid_labels is not None:
                name = parsed[0].strip().casefold()
                if name not in valid_labels:
                    raise ExtractionError(
                        f"vote label {parsed[0]!r} is neither a known dimension nor 'other'"
                    )
            return parsed
    raise ExtractionError(f"JSON payload(s) present but none matches schema {schema!r}")


def request_structured(
    backend: ChatBackend,
    prompt: str,
    schema: str,
    *,
    max_format_retries: int = 1,
    valid_labels: set[str] | None = None,
) -> Any:
    """complete + extract, re-prompting with the same prompt when the response
    is malformed. One malformed response consumes one retry."""
    last: ExtractionError | None = None
    for _ in range(max_format_retries + 1):
        text = backend.complete(prompt)
        try:
            return extract_structured(text, schema, valid_labels=valid_labels)
        except ExtractionError as exc:
            last = exc
    raise ExtractionError(f"structured extraction failed after retries: {last}")
