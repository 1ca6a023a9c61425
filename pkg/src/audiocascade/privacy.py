"""Data-minimization boundary for cloud-bound traffic.

Two pieces: :func:`redact` scrubs transcripts on-device before upload, and
:func:`inspect_cloud_payload` audits every outgoing message so raw audio
cannot leave the device even if a call site is wrong.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from audiocascade.backends.protocol import REQUEST_SCHEMAS

REDACTED = "[REDACTED]"
DEFAULT_BLOB_LIMIT = 4096

# field names that only ever hold audio
WAVEFORM_FIELDS = frozenset({
    "samples", "waveform", "audio", "pcm", "wav", "raw_audio", "audio_bytes", "signal", "frames",
})
MIN_NUMERIC_RUN = 16


class PrivacyViolation(RuntimeError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"privacy violation ({reason}){': ' + detail if detail else ''}")
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class InspectionResult:
    ok: bool
    reason: Optional[str] = None
    detail: str = ""


OK = InspectionResult(True)


@dataclass(frozen=True)
class RedactionPolicy:
    patterns: tuple[tuple[str, str], ...] = (
        (r"\d{7,}", REDACTED),
        (r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+", REDACTED),
    )
    enabled: bool = True
    _compiled: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        compiled = []
        for pattern, token in self.patterns:
            rx = re.compile(pattern)
            if rx.search(token):
                raise ValueError(f"replacement {token!r} re-triggers pattern {pattern!r}")
            compiled.append((rx, token))
        object.__setattr__(self, "patterns", tuple(tuple(p) for p in self.patterns))
        object.__setattr__(self, "_compiled", tuple(compiled))

    @classmethod
    def from_dict(cls, block: Optional[Mapping]) -> RedactionPolicy:
        if not block:
            return cls()
        kwargs = {}
        if "enabled" in block:
            kwargs["enabled"] = bool(block["enabled"])
        if "patterns" in block:
            kwargs["patterns"] = tuple((p["pattern"], p.get("replacement", REDACTED)) for p in block["patterns"])
        return cls(**kwargs)


def redact(text: str, policy: RedactionPolicy = RedactionPolicy()) -> str:
    if not policy.enabled:
        return text
    for rx, token in policy._compiled:
        text = rx.sub(token, text)
    return text


def _numeric_run(value) -> bool:
    return (isinstance(value, list) and len(value) >= MIN_NUMERIC_RUN
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value))


def _find_waveform(value, path: str) -> Optional[str]:
    if isinstance(value, Mapping):
        for key, sub in value.items():
            here = f"{path}.{key}" if path else str(key)
            if str(key).lower() in WAVEFORM_FIELDS:
                return here
            hit = _find_waveform(sub, here)
            if hit:
                return hit
    elif isinstance(value, list):
        if _numeric_run(value):
            return path
        for i, sub in enumerate(value):
            hit = _find_waveform(sub, f"{path}[{i}]")
            if hit:
                return hit
    elif isinstance(value, (bytes, bytearray)):
        return path
    return None


def inspect_cloud_payload(message, blob_limit: int = DEFAULT_BLOB_LIMIT) -> InspectionResult:
    """Audit one cloud-bound request (a dict, or its serialized bytes)."""
    if isinstance(message, (bytes, bytearray, str)):
        try:
            message = json.loads(message)
        except ValueError:
            return InspectionResult(False, "unknown-schema", "not a structured message")
    if not isinstance(message, Mapping):
        return InspectionResult(False, "unknown-schema", "message is not a mapping")
    schema = REQUEST_SCHEMAS.get(message.get("type"))
    if schema is None:
        return InspectionResult(False, "unknown-schema", f"type={message.get('type')!r}")

    for name, spec in schema.fields.items():
        if spec.semantic == "audio":
            return InspectionResult(False, "waveform-field", f"schema declares audio field {name}")

    hit = _find_waveform(dict(message), "")
    if hit:
        return InspectionResult(False, "waveform-field", hit)

    for key, value in message.items():
        if key in schema.fields and schema.fields[key].semantic in ("text", "metadata"):
            continue
        if key in ("v", "type", "sample_id"):
            continue
        size = len(json.dumps(value, ensure_ascii=False).encode("utf-8"))
        if size > blob_limit:
            return InspectionResult(False, "oversize-blob", f"{key} is {size} bytes")
    return OK


def enforce(message, blob_limit: int = DEFAULT_BLOB_LIMIT) -> None:
    result = inspect_cloud_payload(message, blob_limit)
    if not result.ok:
        raise PrivacyViolation(result.reason, result.detail)
