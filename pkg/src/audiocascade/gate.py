"""Deterministic reference confidence gate.

Decides whether a stage-0 answer can be returned as-is (fast path) or
needs refinement. Three cue classes are checked independently: hedging
language, missing evidence, and inconsistency between the answer and
the offered candidates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from audiocascade.domain import GateDecision, Query

DEFAULT_HEDGES = frozenset({
    "possibly", "might", "unclear", "hard to tell", "i think", "not sure", "seems",
    "perhaps", "maybe", "uncertain",
})

STOPWORDS = frozenset({
    "about", "above", "after", "again", "also", "been", "before", "being", "both", "could",
    "does", "doing", "down", "during", "each", "from", "have", "having", "here", "into",
    "just", "more", "most", "only", "other", "over", "same", "some", "such", "than", "that",
    "their", "them", "then", "there", "these", "they", "this", "those", "through", "under",
    "very", "what", "when", "where", "which", "while", "with", "would", "your", "audio",
    "clip", "recording", "sound", "sounds",
})

_TOKEN = re.compile(r"[a-z0-9']+")


@dataclass(frozen=True)
class GateConfig:
    hedging_lexicon: frozenset[str] = field(default_factory=lambda: DEFAULT_HEDGES)
    min_rationale_tokens: int = 6
    require_candidate_match: bool = True

    def __post_init__(self):
        lexicon = frozenset(p.strip().lower() for p in self.hedging_lexicon if p.strip())
        if not lexicon:
            raise ValueError("hedging lexicon must be non-empty")
        if self.min_rationale_tokens < 1:
            raise ValueError("min_rationale_tokens must be >= 1")
        object.__setattr__(self, "hedging_lexicon", lexicon)


def _normalize(text: str) -> str:
    return " ".join(_TOKEN.findall(text.lower()))


def content_tokens(text: str) -> set[str]:
    return {t for t in _TOKEN.findall(text.lower()) if len(t) >= 4 and t not in STOPWORDS}


def has_hedging(texts: Iterable[str], lexicon: Iterable[str]) -> bool:
    padded = [f" {_normalize(t)} " for t in texts]
    return any(f" {_normalize(p)} " in s for p in lexicon for s in padded)


def matches_candidate(answer: str, candidates: Sequence[str]) -> bool:
    a = answer.strip().lower()
    if not a:
        return False
    return any(c.strip().lower() in a or a in c.strip().lower() for c in candidates if c.strip())


def evaluate(s0: str, q: Query, p0: str, config: GateConfig = GateConfig()) -> GateDecision:
    cues = set()
    notes = []

    if has_hedging((s0, p0), config.hedging_lexicon):
        cues.add("hedging")
        notes.append("rationale hedges")

    n_tokens = len(s0.split())
    query_terms = content_tokens(q.text)
    if n_tokens < config.min_rationale_tokens:
        cues.add("missing_evidence")
        notes.append(f"rationale has {n_tokens} tokens")
    elif query_terms and not (content_tokens(s0) & query_terms):
        cues.add("missing_evidence")
        notes.append("rationale shares no content term with the query")

    if config.require_candidate_match and q.candidates and not matches_candidate(p0, q.candidates):
        cues.add("inconsistency")
        notes.append("answer matches no candidate")

    return GateDecision(bool(cues), frozenset(cues), "; ".join(notes))


def escalation_rate(decisions: Sequence[GateDecision]) -> float:
    if not decisions:
        raise ValueError("escalation_rate needs at least one decision")
    return sum(1 for d in decisions if d.escalate) / len(decisions)
