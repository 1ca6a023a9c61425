"""Core value types shared by the pipeline.

Everything here is an immutable value object: safe to hand across worker
threads without locking. Latencies inside :class:`CostLedger` are integer
microseconds so that totals are exact sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

TOOLS = frozenset({"relisten", "asr"})
CUES = frozenset({"hedging", "missing_evidence", "inconsistency"})
STAGES = (
    "edge_perception",
    "network",
    "cloud_gate",
    "cloud_plan",
    "tool_relisten",
    "tool_asr",
    "cloud_reason",
)
TOOL_STAGES = frozenset({"tool_relisten", "tool_asr"})
ASR_SCOPES = frozenset({"whole_clip", "selected_roi"})
WINDOW_SOURCES = frozenset({"energy_event", "fixed_window"})

Window = tuple[float, float]


class RangeError(ValueError):
    """A requested interval falls outside the clip."""

    def __init__(self, bound: str, value: float, limit: str):
        super().__init__(f"{bound}={value!r} out of range ({limit})")
        self.bound = bound
        self.value = value


def to_us(seconds: float) -> int:
    return int(round(seconds * 1_000_000))


def from_us(us: int) -> float:
    return us / 1_000_000


def tool_set(tools) -> frozenset[str]:
    tools = frozenset(tools)
    unknown = tools - TOOLS
    if unknown:
        raise ValueError(f"unknown tools: {sorted(unknown)}")
    return tools


@dataclass(frozen=True, eq=False)
class AudioClip:
    """On-device waveform. Never serialized into a cloud-bound message."""

    samples: np.ndarray
    sample_rate: int
    id: str

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"clip {self.id!r} contains non-finite samples")
        if arr.size and float(np.max(np.abs(arr))) > 1.0:
            raise ValueError(f"clip {self.id!r} has samples outside [-1, 1]")
        if arr is self.samples:
            arr = arr.view()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_seconds(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def pcm16_bytes(self) -> int:
        """Size of the clip as raw 16-bit PCM."""
        return 2 * self.n_samples


@dataclass(frozen=True)
class Query:
    text: str
    candidates: tuple[str, ...] = ()
    sample_id: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text must be non-empty")
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError(f"duplicate candidates in query {self.sample_id!r}")


@dataclass(frozen=True)
class PerceptionResult:
    rationale: str
    answer: str
    measured_latency: float
    scope: Optional[Window] = None  # None means whole clip

    def __post_init__(self):
        if self.measured_latency < 0:
            raise ValueError("measured_latency must be >= 0")
        if self.scope is not None:
            start, end = self.scope
            if not 0 <= start < end:
                raise ValueError(f"invalid window scope {self.scope}")
            object.__setattr__(self, "scope", (float(start), float(end)))


@dataclass(frozen=True)
class GateDecision:
    escalate: bool
    triggered_cues: frozenset[str] = frozenset()
    rationale_note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "triggered_cues", frozenset(self.triggered_cues))


@dataclass(frozen=True)
class RoiWindow:
    index: int
    start_s: float
    end_s: float
    source: str
    energy_score: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"window {self.index}: need 0 <= start < end, got [{self.start_s}, {self.end_s}]")
        if self.source not in WINDOW_SOURCES:
            raise ValueError(f"unknown window source {self.source!r}")

    @property
    def length(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class SegmentProposal:
    clip_id: str
    windows: tuple[RoiWindow, ...]
    clip_duration: float

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(self.windows))
        for i, w in enumerate(self.windows):
            if w.index != i:
                raise ValueError(f"window indices must be contiguous, slot {i} holds index {w.index}")
            if w.end_s > self.clip_duration + 1e-9:
                raise ValueError(f"window {i} ends at {w.end_s} past clip duration {self.clip_duration}")

    def __len__(self) -> int:
        return len(self.windows)


@dataclass(frozen=True)
class RefinementPlan:
    roi_index: int
    focused_query: str
    tools: frozenset[str]
    asr_scope: str = "whole_clip"

    def __post_init__(self):
        object.__setattr__(self, "tools", tool_set(self.tools))
        if not self.tools:
            raise ValueError("a refinement plan must request at least one tool")
        if self.asr_scope not in ASR_SCOPES:
            raise ValueError(f"unknown asr_scope {self.asr_scope!r}")

    def check_against(self, proposal: SegmentProposal) -> None:
        if not 0 <= self.roi_index < len(proposal):
            raise IndexError(f"roi_index {self.roi_index} invalid for {len(proposal)} windows")


@dataclass(frozen=True)
class EvidenceBundle:
    initial: PerceptionResult
    query: Query
    relisten_evidence: Optional[PerceptionResult] = None
    transcript: Optional[str] = None

    @property
    def evidence_key(self) -> str:
        """Which evidence is present: none, relisten, asr or both."""
        has_audio = self.relisten_evidence is not None
        has_text = self.transcript is not None
        if has_audio and has_text:
            return "both"
        if has_audio:
            return "relisten"
        if has_text:
            return "asr"
        return "none"


@dataclass(frozen=True)
class Verdict:
    answer: str
    path: str
    tools_used: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.path not in ("fast", "investigate"):
            raise ValueError(f"unknown path {self.path!r}")
        object.__setattr__(self, "tools_used", tool_set(self.tools_used))
        if self.path == "fast" and self.tools_used:
            raise ValueError("fast-path verdicts cannot use tools")

    @property
    def path_class(self) -> str:
        if self.path == "fast":
            return "fast"
        if self.tools_used == TOOLS:
            return "both"
        if self.tools_used == {"relisten"}:
            return "relisten_only"
        if self.tools_used == {"asr"}:
            return "asr_only"
        return "reason_only"


@dataclass(frozen=True)
class LedgerEntry:
    stage: str
    latency_us: int
    cloud_bound_bytes: int = 0
    device_bound_bytes: int = 0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown ledger stage {self.stage!r}")
        if self.latency_us < 0 or self.cloud_bound_bytes < 0 or self.device_bound_bytes < 0:
            raise ValueError(f"negative ledger entry for {self.stage}")

    @property
    def latency_s(self) -> float:
        return from_us(self.latency_us)


@dataclass(frozen=True)
class CostLedger:
    entries: tuple[LedgerEntry, ...] = field(default_factory=tuple)

    def add(self, stage: str, latency_s: float = 0.0, cloud_bound_bytes: int = 0,
            device_bound_bytes: int = 0, *, extend: bool = False, latency_us: Optional[int] = None) -> CostLedger:
        """Return a new ledger with one more entry.

        With ``extend=True`` and a trailing entry of the same stage, that
        entry is grown in place of appending a new one.
        """
        us = to_us(latency_s) if latency_us is None else int(latency_us)
        if extend and self.entries and self.entries[-1].stage == stage:
            last = self.entries[-1]
            merged = LedgerEntry(stage, last.latency_us + us,
                                 last.cloud_bound_bytes + cloud_bound_bytes,
                                 last.device_bound_bytes + device_bound_bytes)
            return CostLedger(self.entries[:-1] + (merged,))
        return CostLedger(self.entries + (LedgerEntry(stage, us, cloud_bound_bytes, device_bound_bytes),))

    @property
    def total_us(self) -> int:
        return sum(e.latency_us for e in self.entries)

    @property
    def cloud_bound_bytes(self) -> int:
        return sum(e.cloud_bound_bytes for e in self.entries)

    @property
    def device_bound_bytes(self) -> int:
        return sum(e.device_bound_bytes for e in self.entries)

    @property
    def stages(self) -> tuple[str, ...]:
        return tuple(e.stage for e in self.entries)

    def stage_totals_us(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.stage] = out.get(e.stage, 0) + e.latency_us
        return out

    def to_json(self) -> list[list]:
        return [[e.stage, e.latency_us, e.cloud_bound_bytes, e.device_bound_bytes] for e in self.entries]

    @classmethod
    def from_json(cls, rows) -> CostLedger:
        return cls(tuple(LedgerEntry(str(s), int(l), int(c), int(d)) for s, l, c, d in rows))


def ledger_total(ledger: CostLedger) -> float:
    """End-to-end latency of one trace, in seconds."""
    return from_us(ledger.total_us)


def slice_clip(clip: AudioClip, start_s: float, end_s: float) -> AudioClip:
    """Cut ``[start_s, end_s)`` out of ``clip``.

    Index mapping is ``floor(start * rate)`` to ``min(len, round(end * rate))``.
    """
    duration = clip.duration_seconds
    if not (start_s >= 0 and math.isfinite(start_s)):
        raise RangeError("start_s", start_s, "must be >= 0")
    if not math.isfinite(end_s) or end_s > duration + 1e-9:
        raise RangeError("end_s", end_s, f"must be <= clip duration {duration}")
    if not start_s < end_s:
        raise RangeError("start_s", start_s, f"must be < end_s={end_s}")
    lo = int(math.floor(start_s * clip.sample_rate + 1e-9))
    hi = min(clip.n_samples, int(round(end_s * clip.sample_rate)))
    return AudioClip(clip.samples[lo:hi], clip.sample_rate, f"{clip.id}[{start_s:.3f}:{end_s:.3f}]")
