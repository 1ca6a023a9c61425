"""Coarse-to-fine pipeline: stage-0 perception, gating, planning, tools, verdict.

Each sample runs strictly sequentially (batch size 1). Samples are
independent, so :func:`run_dataset` may fan them out to worker threads;
traces always come back in input order.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from audiocascade import gate as gate_mod
from audiocascade import netcost, privacy
from audiocascade.backends.base import AsrBackend, CloudControllerBackend, EdgePerceptionBackend
from audiocascade.backends.planner import reference_plan
from audiocascade.backends.protocol import PROTOCOL_VERSION, encode, validate_request
from audiocascade.domain import (
    TOOLS,
    AudioClip,
    CostLedger,
    EvidenceBundle,
    GateDecision,
    PerceptionResult,
    Query,
    RefinementPlan,
    Verdict,
)
from audiocascade.gate import GateConfig
from audiocascade.netcost import NetworkModel
from audiocascade.privacy import PrivacyViolation, RedactionPolicy
from audiocascade.segmenter import SegmenterConfig, propose

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Policy:
    name: str
    gating: str  # none | always | adaptive
    tools_allowed: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.gating not in ("none", "always", "adaptive"):
            raise ValueError(f"unknown gating {self.gating!r}")
        object.__setattr__(self, "tools_allowed", frozenset(self.tools_allowed))
        if self.tools_allowed - TOOLS:
            raise ValueError(f"unknown tools {sorted(self.tools_allowed - TOOLS)}")
        if self.gating == "none" and self.tools_allowed:
            raise ValueError("a policy without gating cannot use tools")


POLICIES = {
    p.name: p
    for p in (
        Policy("baseline", "none"),
        Policy("hybrid_describe_reason", "always"),
        Policy("adaptive_relisten", "adaptive", frozenset({"relisten"})),
        Policy("always_on_asr", "always", TOOLS),
        Policy("adaptive_asr", "adaptive", TOOLS),
    )
}
POLICY_ORDER = tuple(POLICIES)


def get_policy(name: str) -> Policy:
    try:
        return POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_ORDER)}") from None


@dataclass
class Backends:
    edge: EdgePerceptionBackend
    asr: Optional[AsrBackend] = None
    cloud: Optional[CloudControllerBackend] = None
    gate_mode: str = "remote"  # remote | heuristic
    planner: str = "cloud"  # cloud | reference

    def __post_init__(self):
        if self.gate_mode not in ("remote", "heuristic"):
            raise ValueError(f"unknown gate_mode {self.gate_mode!r}")
        if self.planner not in ("cloud", "reference"):
            raise ValueError(f"unknown planner {self.planner!r}")


@dataclass(frozen=True)
class PipelineConfig:
    segmenter: SegmenterConfig = SegmenterConfig()
    gate: GateConfig = GateConfig()
    network: NetworkModel = NetworkModel()
    redaction: RedactionPolicy = RedactionPolicy()
    mode: str = "sim"  # sim | live
    blob_limit: int = privacy.DEFAULT_BLOB_LIMIT

    def __post_init__(self):
        if self.mode not in ("sim", "live"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class TraceRecord:
    sample_id: str
    verdict: Optional[Verdict]
    ledger: CostLedger
    initial_answer: Optional[str] = None
    gate_decision: Optional[GateDecision] = None
    plan: Optional[RefinementPlan] = None
    correct: Optional[bool] = None
    initial_correct: Optional[bool] = None
    tools_dropped: frozenset[str] = frozenset()
    error: Optional[str] = None
    error_kind: Optional[str] = None
    wire: tuple[bytes, ...] = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        d = {
            "sample_id": self.sample_id,
            "ledger": self.ledger.to_json(),
            "initial_answer": self.initial_answer,
            "correct": self.correct,
            "initial_correct": self.initial_correct,
            "tools_dropped": sorted(self.tools_dropped),
            "verdict": None,
            "gate": None,
            "plan": None,
            "error": self.error,
            "error_kind": self.error_kind,
        }
        if self.verdict is not None:
            d["verdict"] = {"answer": self.verdict.answer, "path": self.verdict.path,
                            "tools_used": sorted(self.verdict.tools_used)}
        if self.gate_decision is not None:
            d["gate"] = {"escalate": self.gate_decision.escalate,
                         "cues": sorted(self.gate_decision.triggered_cues),
                         "note": self.gate_decision.rationale_note}
        if self.plan is not None:
            d["plan"] = {"roi_index": self.plan.roi_index, "focused_query": self.plan.focused_query,
                         "tools": sorted(self.plan.tools), "asr_scope": self.plan.asr_scope}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TraceRecord:
        v = d.get("verdict")
        g = d.get("gate")
        p = d.get("plan")
        return cls(
            sample_id=d["sample_id"],
            verdict=Verdict(v["answer"], v["path"], frozenset(v["tools_used"])) if v else None,
            ledger=CostLedger.from_json(d["ledger"]),
            initial_answer=d.get("initial_answer"),
            gate_decision=GateDecision(g["escalate"], frozenset(g["cues"]), g["note"]) if g else None,
            plan=RefinementPlan(p["roi_index"], p["focused_query"], frozenset(p["tools"]), p["asr_scope"]) if p else None,
            correct=d.get("correct"),
            initial_correct=d.get("initial_correct"),
            tools_dropped=frozenset(d.get("tools_dropped", ())),
            error=d.get("error"),
            error_kind=d.get("error_kind"),
        )


class SampleFailure(RuntimeError):
    """A sample's pipeline aborted; carries everything recorded so far."""

    def __init__(self, kind: str, message: str, partial: TraceRecord):
        super().__init__(message)
        self.kind = kind
        self.partial = partial


@dataclass(frozen=True)
class Sample:
    query: Query
    clip: Union[AudioClip, Callable[[], AudioClip]]
    gold: Optional[str] = None

    def load_clip(self) -> AudioClip:
        return self.clip if isinstance(self.clip, AudioClip) else self.clip()


def normalize_answer(text: str) -> str:
    return " ".join(text.strip().lower().split())


def answers_match(answer: Optional[str], gold: Optional[str]) -> Optional[bool]:
    if gold is None or answer is None:
        return None
    return normalize_answer(answer) == normalize_answer(gold)


class _Run:
    """Mutable state for one sample's pipeline."""

    def __init__(self, clip, q, policy, backends, config, gold):
        self.clip, self.q, self.policy = clip, q, policy
        self.backends, self.config, self.gold = backends, config, gold
        self.ledger = CostLedger()
        self.wire: list[bytes] = []
        self.rng = netcost.sample_rng(config.network.seed, q.sample_id)
        self.initial: Optional[PerceptionResult] = None
        self.decision: Optional[GateDecision] = None
        self.plan: Optional[RefinementPlan] = None
        self.dropped: frozenset[str] = frozenset()

    @property
    def live(self) -> bool:
        return self.config.mode == "live"

    def charge(self, stage: str, scripted_s: float, wall_s: float) -> None:
        self.ledger = self.ledger.add(stage, wall_s if self.live else scripted_s)

    def cloud_call(self, endpoint: str, request: dict, stage: str, *, new_round_trip: bool = True) -> dict:
        cloud = self.backends.cloud
        if cloud is None:
            raise RuntimeError(f"no cloud controller configured for {endpoint}")
        privacy.enforce(request, self.config.blob_limit)
        validate_request(endpoint, request)
        body = encode(request)
        self.wire.append(body)
        net = self.config.network
        self.ledger = netcost.charge_transfer(self.ledger, "cloud_bound", len(body), net, self.rng,
                                              include_rtt=new_round_trip)
        t0 = time.perf_counter()
        response = cloud.call(endpoint, request)
        wall = time.perf_counter() - t0
        self.ledger = netcost.charge_transfer(self.ledger, "device_bound", len(encode(response)), net, self.rng,
                                              include_rtt=False)
        self.charge(stage, float(response.get("latency_s", 0.0)), wall)
        return response

    def trace(self, verdict: Optional[Verdict], error: Optional[str] = None, kind: Optional[str] = None) -> TraceRecord:
        p0 = self.initial.answer if self.initial else None
        return TraceRecord(
            sample_id=self.q.sample_id,
            verdict=verdict,
            ledger=self.ledger,
            initial_answer=p0,
            gate_decision=self.decision,
            plan=self.plan,
            correct=answers_match(verdict.answer, self.gold) if verdict else (False if self.gold is not None else None),
            initial_correct=answers_match(p0, self.gold),
            tools_dropped=self.dropped,
            error=error,
            error_kind=kind,
            wire=tuple(self.wire),
        )


def _execute(run: _Run) -> TraceRecord:
    clip, q, policy, backends, config = run.clip, run.q, run.policy, run.backends, run.config

    t0 = time.perf_counter()
    initial = backends.edge.infer(clip, q)
    run.initial = initial
    run.charge("edge_perception", initial.measured_latency, time.perf_counter() - t0)
    s0, p0 = initial.rationale, initial.answer

    if policy.gating == "none":
        return run.trace(Verdict(p0, "fast"))

    shared_trip = False
    if policy.gating == "adaptive":
        if backends.gate_mode == "heuristic":
            run.decision = gate_mod.evaluate(s0, q, p0, config.gate)
        else:
            request = {"v": PROTOCOL_VERSION, "type": "gate", "sample_id": q.sample_id, "s0": s0, "p0": p0,
                       "query_text": q.text, "candidates": list(q.candidates)}
            response = run.cloud_call("gate", request, "cloud_gate")
            escalate = response["escalate"]
            run.decision = GateDecision(escalate, frozenset({"remote"}) if escalate else frozenset(),
                                        response.get("note", ""))
            shared_trip = True
        if not run.decision.escalate:
            return run.trace(Verdict(p0, "fast"))

    effective: frozenset[str] = frozenset()
    proposal = None
    if policy.tools_allowed:
        proposal = propose(clip, config.segmenter)
        if backends.planner == "reference":
            plan = reference_plan(proposal, s0, q)
        else:
            windows = []
            for w in proposal.windows:
                item = {"index": w.index, "start_s": w.start_s, "end_s": w.end_s, "source": w.source}
                if w.energy_score is not None:
                    item["energy_score"] = w.energy_score
                windows.append(item)
            request = {"v": PROTOCOL_VERSION, "type": "plan", "sample_id": q.sample_id, "s0": s0,
                       "query_text": q.text, "windows": windows}
            response = run.cloud_call("plan", request, "cloud_plan", new_round_trip=not shared_trip)
            plan = RefinementPlan(response["roi_index"], response["focused_query"],
                                  frozenset(response["tools"]), response["asr_scope"])
        plan.check_against(proposal)
        run.plan = plan
        effective = plan.tools & policy.tools_allowed
        run.dropped = plan.tools - policy.tools_allowed
        if run.dropped:
            log.debug("%s: policy %s dropped tools %s", q.sample_id, policy.name, sorted(run.dropped))

    relisten = transcript = None
    if effective:
        roi = proposal.windows[run.plan.roi_index]
        window = (roi.start_s, roi.end_s)
        if "relisten" in effective:
            focused = Query(run.plan.focused_query, q.candidates, q.sample_id)
            t0 = time.perf_counter()
            relisten = backends.edge.infer(clip, focused, window)
            run.charge("tool_relisten", relisten.measured_latency, time.perf_counter() - t0)
        if "asr" in effective:
            if backends.asr is None:
                raise RuntimeError("plan requests ASR but no ASR backend is configured")
            scope = None if run.plan.asr_scope == "whole_clip" else window
            t0 = time.perf_counter()
            raw_text, lat = backends.asr.transcribe(clip, scope)
            run.charge("tool_asr", lat, time.perf_counter() - t0)
            transcript = privacy.redact(raw_text, config.redaction)

    bundle = EvidenceBundle(initial, q, relisten, transcript)
    request = {"v": PROTOCOL_VERSION, "type": "reason", "sample_id": q.sample_id, "s0": s0, "p0": p0,
               "query_text": q.text, "candidates": list(q.candidates)}
    if bundle.relisten_evidence is not None:
        request["e_audio"] = {"rationale": relisten.rationale, "answer": relisten.answer}
    if bundle.transcript is not None:
        request["t_text"] = bundle.transcript
    response = run.cloud_call("reason", request, "cloud_reason")
    return run.trace(Verdict(response["answer"], "investigate", effective))


def run_sample(clip: AudioClip, q: Query, policy: Policy, backends: Backends,
               config: PipelineConfig = PipelineConfig(), gold: Optional[str] = None) -> TraceRecord:
    """Run one sample end to end.

    Raises :class:`SampleFailure` (with the partial trace attached) when a
    backend fails or a cloud-bound message is refused by the privacy audit.
    """
    if clip.id != q.sample_id:
        raise ValueError(f"clip {clip.id!r} does not belong to sample {q.sample_id!r}")
    run = _Run(clip, q, policy, backends, config, gold)
    try:
        return _execute(run)
    except PrivacyViolation as exc:
        raise SampleFailure("privacy_violation", str(exc), run.trace(None, str(exc), "privacy_violation")) from exc
    except Exception as exc:  # noqa: BLE001 - every backend failure is contained per sample
        msg = f"{type(exc).__name__}: {exc}"
        raise SampleFailure("backend_error", msg, run.trace(None, msg, "backend_error")) from exc


def _run_contained(sample: Sample, policy: Policy, backends: Backends, config: PipelineConfig) -> TraceRecord:
    try:
        clip = sample.load_clip()
    except Exception as exc:  # noqa: BLE001
        msg = f"{type(exc).__name__}: {exc}"
        return TraceRecord(sample.query.sample_id, None, CostLedger(), correct=False if sample.gold else None,
                           error=msg, error_kind="input_error")
    try:
        return run_sample(clip, sample.query, policy, backends, config, sample.gold)
    except SampleFailure as failure:
        log.warning("%s failed under %s: %s", sample.query.sample_id, policy.name, failure)
        return failure.partial


def run_dataset(samples: Sequence[Sample], policy: Policy, backends: Backends,
                config: PipelineConfig = PipelineConfig(), parallelism: int = 1) -> list[TraceRecord]:
    if not samples:
        raise ValueError("run_dataset needs at least one sample")
    if parallelism <= 1:
        return [_run_contained(s, policy, backends, config) for s in samples]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda s: _run_contained(s, policy, backends, config), samples))
