from __future__ import annotations

import re

from audiocascade.domain import Query, RefinementPlan, SegmentProposal

SPEECH_KEYWORDS = ("say", "said", "word", "speaker", "password", "mean", "statement")
FOCUS_PREFIX = "Focus on the selected segment: "

_SPEECH_RX = re.compile(r"\b(?:" + "|".join(SPEECH_KEYWORDS) + r")", re.IGNORECASE)


def is_speech_heavy(text: str) -> bool:
    return _SPEECH_RX.search(text) is not None


def reference_plan(proposal: SegmentProposal, s0: str, q: Query) -> RefinementPlan:
    """Local deterministic planner used when no cloud planner is configured.

    Picks the highest-energy window (fixed windows count as zero energy,
    ties go to the earliest start) and asks for ASR on speech-heavy queries.
    """
    if not proposal.windows:
        raise ValueError("cannot plan over an empty proposal")

    def energy(w):
        return w.energy_score if w.source == "energy_event" and w.energy_score is not None else 0.0

    best = min(proposal.windows, key=lambda w: (-energy(w), w.start_s, w.index))
    has_event = any(w.source == "energy_event" for w in proposal.windows)
    if is_speech_heavy(q.text):
        tools = {"asr"} | ({"relisten"} if has_event else set())
    else:
        tools = {"relisten"}
    return RefinementPlan(best.index, FOCUS_PREFIX + q.text, frozenset(tools), "whole_clip")
