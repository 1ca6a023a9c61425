"""Wire schemas for the cloud controller (gate / plan / reason).

Messages are single-line canonical JSON. Every request carries ``v``,
``type`` and ``sample_id``. No request schema has a field whose semantic
type is audio; the privacy audit checks this, and the tests check it
statically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

PROTOCOL_VERSION = 1
ENDPOINTS = ("gate", "plan", "reason")


class BackendError(RuntimeError):
    """Base class for failures raised by a backend."""


class ProtocolError(BackendError):
    """Message does not match its schema, or the peer answered with an error."""


class NetworkError(BackendError):
    """Transport failure. Safe to retry."""

    retriable = True


@dataclass(frozen=True)
class FieldSpec:
    types: tuple[type, ...]
    required: bool = True
    semantic: str = "text"  # text | metadata | control
    item_types: tuple[type, ...] = ()


def _text(required=True):
    return FieldSpec((str,), required, "text")


def _text_list():
    return FieldSpec((list,), True, "text", (str,))


@dataclass(frozen=True)
class Schema:
    name: str
    fields: Mapping[str, FieldSpec]


_HEADER = {
    "v": FieldSpec((int,), True, "control"),
    "type": FieldSpec((str,), True, "control"),
    "sample_id": FieldSpec((str,), True, "control"),
}

REQUEST_SCHEMAS: dict[str, Schema] = {
    "gate": Schema("gate", {**_HEADER, "s0": _text(), "p0": _text(), "query_text": _text(),
                            "candidates": _text_list()}),
    "plan": Schema("plan", {**_HEADER, "s0": _text(), "query_text": _text(),
                            "windows": FieldSpec((list,), True, "metadata", (dict,))}),
    "reason": Schema("reason", {**_HEADER, "s0": _text(), "p0": _text(),
                                "e_audio": FieldSpec((dict,), False, "text"),
                                "t_text": _text(required=False), "query_text": _text(),
                                "candidates": _text_list()}),
}

_RESP_HEADER = {
    "v": FieldSpec((int,), True, "control"),
    "latency_s": FieldSpec((int, float), False, "control"),
}

RESPONSE_SCHEMAS: dict[str, Schema] = {
    "gate": Schema("gate", {**_RESP_HEADER, "escalate": FieldSpec((bool,)), "note": _text(required=False)}),
    "plan": Schema("plan", {**_RESP_HEADER, "roi_index": FieldSpec((int,)), "focused_query": _text(),
                            "tools": _text_list(), "asr_scope": _text()}),
    "reason": Schema("reason", {**_RESP_HEADER, "answer": _text()}),
}

WINDOW_KEYS = {"index", "start_s", "end_s", "source", "energy_score"}
E_AUDIO_KEYS = {"rationale", "answer"}


def _check_type(value, spec: FieldSpec) -> bool:
    if bool in spec.types:
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if not isinstance(value, spec.types):
        return False
    if spec.item_types:
        return all(isinstance(v, spec.item_types) for v in value)
    return True


def validate(message: Mapping[str, Any], schema: Schema, kind: str = "request") -> None:
    if not isinstance(message, Mapping):
        raise ProtocolError(f"{schema.name} {kind} is not an object")
    unknown = set(message) - set(schema.fields)
    if unknown:
        raise ProtocolError(f"{schema.name} {kind} has unknown fields {sorted(unknown)}")
    for name, spec in schema.fields.items():
        if name not in message:
            if spec.required:
                raise ProtocolError(f"{schema.name} {kind} missing field {name!r}")
            continue
        if not _check_type(message[name], spec):
            raise ProtocolError(f"{schema.name} {kind} field {name!r} has wrong type")
    if message.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {message.get('v')!r}")
    if kind == "request":
        if message.get("type") != schema.name:
            raise ProtocolError(f"type {message.get('type')!r} sent to {schema.name} endpoint")
        for w in message.get("windows", ()):
            if set(w) - WINDOW_KEYS or not {"index", "start_s", "end_s", "source"} <= set(w):
                raise ProtocolError(f"malformed window {w}")
        if "e_audio" in message and set(message["e_audio"]) != E_AUDIO_KEYS:
            raise ProtocolError("e_audio must carry exactly rationale and answer")
    if "latency_s" in message:
        lat = message["latency_s"]
        if not math.isfinite(lat) or lat < 0:
            raise ProtocolError(f"bad latency_s {lat!r}")


def validate_request(endpoint: str, message: Mapping) -> None:
    if endpoint not in REQUEST_SCHEMAS:
        raise ProtocolError(f"unknown endpoint {endpoint!r}")
    validate(message, REQUEST_SCHEMAS[endpoint], "request")


def validate_response(endpoint: str, message: Mapping, request: Mapping | None = None) -> None:
    if isinstance(message, Mapping) and "error" in message:
        raise ProtocolError(f"{endpoint} failed remotely: {message.get('error')}")
    validate(message, RESPONSE_SCHEMAS[endpoint], "response")
    if endpoint == "plan" and request is not None:
        n = len(request.get("windows", ()))
        if not 0 <= message["roi_index"] < n:
            raise ProtocolError(f"plan roi_index {message['roi_index']} out of range for {n} windows")
        tools = set(message["tools"])
        if not tools or tools - {"relisten", "asr"}:
            raise ProtocolError(f"plan tools {message['tools']} invalid")
        if message["asr_scope"] not in ("whole_clip", "selected_roi"):
            raise ProtocolError(f"plan asr_scope {message['asr_scope']!r} invalid")


def encode(message: Mapping) -> bytes:
    """Canonical single-line encoding; byte counts are taken from this."""
    return json.dumps(message, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def decode(data: bytes) -> dict:
    try:
        message = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ProtocolError(f"undecodable message: {exc}") from None
    if not isinstance(message, dict):
        raise ProtocolError("message is not an object")
    return message


def error_message(error: str, kind: str = "protocol") -> dict:
    return {"v": PROTOCOL_VERSION, "error": error, "kind": kind}
