"""Edge-first, cloud-escalating audio question answering with cost and privacy accounting."""

from audiocascade.domain import (
    AudioClip,
    CostLedger,
    PerceptionResult,
    Query,
    RefinementPlan,
    RoiWindow,
    SegmentProposal,
    Verdict,
    ledger_total,
    slice_clip,
)

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "CostLedger",
    "PerceptionResult",
    "Query",
    "RefinementPlan",
    "RoiWindow",
    "SegmentProposal",
    "Verdict",
    "ledger_total",
    "slice_clip",
]
