"""Fixture-driven stand-ins for the edge model, local ASR and cloud controller.

A fixture is a JSONL file, one record per ``(sample_id, stage, scope)``.
Stages: ``stage0``, ``relisten``, ``asr``, ``gate``, ``plan``, ``reason``.
Scopes: ``clip`` or ``window:<start>-<end>`` for perception/ASR records,
``clip`` for gate/plan, and the evidence key (``none``, ``relisten``,
``asr``, ``both``) for reason records. Latencies come from the fixture,
never from the wall clock.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from audiocascade.backends.protocol import (
    PROTOCOL_VERSION,
    BackendError,
    ProtocolError,
    validate_request,
    validate_response,
)
from audiocascade.domain import AudioClip, PerceptionResult, Query, Window

STAGE_FIELDS = {
    "stage0": {"rationale", "answer"},
    "relisten": {"rationale", "answer"},
    "asr": {"transcript"},
    "gate": {"escalate"},
    "plan": {"roi_index", "focused_query", "tools", "asr_scope"},
    "reason": {"answer"},
}
OPTIONAL_FIELDS = {"correct", "note"}
COMMON_FIELDS = {"sample_id", "stage", "scope", "latency_s"}
ALL_FIELDS = COMMON_FIELDS | OPTIONAL_FIELDS | set().union(*STAGE_FIELDS.values())
REASON_SCOPES = ("none", "relisten", "asr", "both")


class FixtureError(ValueError):
    """Fixture file is malformed or incomplete."""


class FixtureMiss(BackendError, KeyError):
    def __init__(self, sample_id: str, stage: str, scope: str):
        super().__init__(f"no fixture record for sample {sample_id!r}, stage {stage!r}, scope {scope!r}")
        self.sample_id, self.stage, self.scope = sample_id, stage, scope

    def __str__(self):
        return self.args[0]


def scope_key(scope: Optional[Window]) -> str:
    if scope is None:
        return "clip"
    return f"window:{scope[0]:.3f}-{scope[1]:.3f}"


def evidence_scope(tools: Iterable[str]) -> str:
    tools = set(tools)
    if tools == {"relisten", "asr"}:
        return "both"
    if tools == {"relisten"}:
        return "relisten"
    if tools == {"asr"}:
        return "asr"
    return "none"


class ScriptedFixture:
    def __init__(self, records: dict[tuple[str, str, str], dict]):
        self.records = records
        self.sample_ids = sorted({k[0] for k in records})

    @classmethod
    def load(cls, path, *, check: bool = True) -> ScriptedFixture:
        records: dict[tuple[str, str, str], dict] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except ValueError as exc:
                    raise FixtureError(f"{path}:{lineno}: invalid JSON ({exc})") from None
                cls._check_record(rec, f"{path}:{lineno}")
                key = (rec["sample_id"], rec["stage"], rec.get("scope", "clip"))
                if key in records:
                    raise FixtureError(f"{path}:{lineno}: duplicate record {key}")
                records[key] = rec
        fixture = cls(records)
        if check:
            fixture.check_complete()
        return fixture

    @staticmethod
    def _check_record(rec, where: str) -> None:
        if not isinstance(rec, dict):
            raise FixtureError(f"{where}: record is not an object")
        unknown = set(rec) - ALL_FIELDS
        if unknown:
            raise FixtureError(f"{where}: unknown fields {sorted(unknown)}")
        stage = rec.get("stage")
        if stage not in STAGE_FIELDS:
            raise FixtureError(f"{where}: unknown stage {stage!r}")
        missing = ({"sample_id", "latency_s"} | STAGE_FIELDS[stage]) - set(rec)
        if missing:
            raise FixtureError(f"{where}: missing fields {sorted(missing)}")
        lat = rec["latency_s"]
        if isinstance(lat, bool) or not isinstance(lat, (int, float)) or lat < 0:
            raise FixtureError(f"{where}: latency_s must be a non-negative number")
        if stage == "reason" and rec.get("scope", "clip") not in REASON_SCOPES:
            raise FixtureError(f"{where}: reason scope must be one of {REASON_SCOPES}")

    def check_complete(self, sample_ids: Optional[Iterable[str]] = None) -> None:
        """Every sample needs stage0, gate, plan, the planned tools and the matching reason record."""
        ids = self.sample_ids if sample_ids is None else list(sample_ids)
        problems = []
        for sid in ids:
            for stage in ("stage0", "gate", "plan"):
                if (sid, stage, "clip") not in self.records:
                    problems.append(f"{sid}: missing {stage} record")
            plan = self.records.get((sid, "plan", "clip"))
            if plan is None:
                continue
            tools = set(plan["tools"])
            if "relisten" in tools and not self._has(sid, "relisten"):
                problems.append(f"{sid}: plan uses relisten but no relisten record")
            if "asr" in tools and not self._has(sid, "asr"):
                problems.append(f"{sid}: plan uses asr but no asr record")
            if (sid, "reason", evidence_scope(tools)) not in self.records:
                problems.append(f"{sid}: missing reason record for evidence {evidence_scope(tools)!r}")
        if problems:
            head = "; ".join(problems[:5])
            raise FixtureError(f"fixture incomplete ({len(problems)} problems): {head}")

    def _has(self, sample_id: str, stage: str) -> bool:
        return any(k[0] == sample_id and k[1] == stage for k in self.records)

    def lookup(self, sample_id: str, stage: str, scope: str = "clip") -> dict:
        try:
            return self.records[(sample_id, stage, scope)]
        except KeyError:
            raise FixtureMiss(sample_id, stage, scope) from None

    def dump(self, path) -> None:
        write_records(path, self.records.values())


def write_records(path, records: Iterable[dict]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


class ScriptedEdge:
    name = "scripted-edge"
    nominal_latency_s = 0.155

    def __init__(self, fixture: ScriptedFixture):
        self.fixture = fixture

    def infer(self, clip: AudioClip, query: Query, scope: Optional[Window] = None) -> PerceptionResult:
        stage = "stage0" if scope is None else "relisten"
        rec = self.fixture.lookup(clip.id, stage, scope_key(scope))
        return PerceptionResult(rec["rationale"], rec["answer"], float(rec["latency_s"]), scope)


class ScriptedAsr:
    name = "scripted-asr"
    nominal_latency_s = 1.0

    def __init__(self, fixture: ScriptedFixture):
        self.fixture = fixture

    def transcribe(self, clip: AudioClip, scope: Optional[Window] = None) -> tuple[str, float]:
        rec = self.fixture.lookup(clip.id, "asr", scope_key(scope))
        return rec["transcript"], float(rec["latency_s"])


class ScriptedCloud:
    """In-process cloud controller; also the request handler behind mock-cloud."""

    name = "scripted-cloud"

    def __init__(self, fixture: ScriptedFixture):
        self.fixture = fixture

    def handle(self, endpoint: str, request: dict) -> dict:
        sid = request["sample_id"]
        if endpoint == "gate":
            rec = self.fixture.lookup(sid, "gate")
            return {"v": PROTOCOL_VERSION, "escalate": bool(rec["escalate"]),
                    "note": rec.get("note", ""), "latency_s": rec["latency_s"]}
        if endpoint == "plan":
            rec = self.fixture.lookup(sid, "plan")
            return {"v": PROTOCOL_VERSION, "roi_index": rec["roi_index"], "focused_query": rec["focused_query"],
                    "tools": sorted(rec["tools"]), "asr_scope": rec["asr_scope"], "latency_s": rec["latency_s"]}
        if endpoint == "reason":
            tools = set()
            if "e_audio" in request:
                tools.add("relisten")
            if "t_text" in request:
                tools.add("asr")
            rec = self.fixture.lookup(sid, "reason", evidence_scope(tools))
            return {"v": PROTOCOL_VERSION, "answer": rec["answer"], "latency_s": rec["latency_s"]}
        raise ProtocolError(f"unknown endpoint {endpoint!r}")

    def call(self, endpoint: str, request: dict) -> dict:
        validate_request(endpoint, request)
        response = self.handle(endpoint, request)
        validate_response(endpoint, response, request)
        return response
