"""Generator for the shipped reference dataset, fixture and run config.

The reference fixture exists to regression-test the harness arithmetic
(routing, stage accounting, scoring), not model quality. Its scripted
answers and latencies are authored so that a five-policy run lands on
fixed accuracy/cost targets, per-stage mean latencies and a path mix.

Samples fall into four groups by how the scripted cloud treats them:
``fast`` (gate passes), ``relisten`` / ``asr`` / ``both`` (escalated, plan
asks for those tools). Per-group latency totals below are integer
microseconds; each group's total is spread over its samples and then
corrected so the sum is exact.

Regenerate with ``python -m audiocascade.bench.reference [out_dir]``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import yaml

from audiocascade.backends.planner import FOCUS_PREFIX
from audiocascade.backends.scripted import scope_key, write_records
from audiocascade.bench.dataset import synthesize
from audiocascade.gate import content_tokens
from audiocascade.segmenter import SegmenterConfig, propose

REFERENCE_DIR = Path(__file__).resolve().parent.parent / "data" / "reference"
SEED = 20240917
N = 1000
SAMPLE_RATE = 8000
GROUP_SIZES = {"fast": 382, "relisten": 274, "asr": 197, "both": 147}
NETWORK_CALL_S = 0.123609

# (sample group, fixture stage, scope) -> total latency in microseconds over the group
LATENCY_BUDGET_US = {
    ("all", "stage0", "clip"): 157_000_000,
    ("all", "gate", "clip"): 450_000_000,
    ("escalated", "plan", "clip"): 150_000_000,
    ("fast", "plan", "clip"): 76_400_000,
    ("relisten+both", "relisten", "roi"): 842_000_000,
    ("asr+both", "asr", "clip"): 1_008_000_000,
    ("fast", "asr", "clip"): 382_000_000,
    ("relisten", "reason", "relisten"): 2_466_000_000,
    ("asr", "reason", "asr"): 2_167_000_000,
    ("both", "reason", "both"): 2_177_001_000,
    ("both", "reason", "relisten"): 1_688_501_000,
    ("asr", "reason", "none"): 492_500_000,
    ("fast", "reason", "none"): 955_000_000,
    ("relisten+both", "reason", "none"): 1_137_891_000,
    ("fast", "reason", "asr"): 1_385_381_000,
}

# (group, stage, scope) -> (number correct, number correct among stage-0-correct samples or None)
CORRECT_COUNTS = {
    ("fast", "stage0"): (200, None),
    ("relisten", "stage0"): (30, None),
    ("asr", "stage0"): (22, None),
    ("both", "stage0"): (20, None),
    ("relisten", "relisten"): (130, 28),
    ("asr", "asr"): (110, 21),
    ("both", "both"): (96, 19),
    ("both", "relisten"): (51, None),
    ("asr", "none"): (50, None),
    ("fast", "none"): (190, None),
    ("relisten+both", "none"): (153, None),
    ("fast", "asr"): (181, 175),
}

PLAN_TOOLS = {"fast": ["asr"], "relisten": ["relisten"], "asr": ["asr"], "both": ["asr", "relisten"]}

EVENT_QUESTIONS = [
    ("Which sound event occurs first in the recording?",
     ["a dog barking", "a door slamming", "a car horn", "glass breaking"]),
    ("How many distinct impact sounds are heard?", ["one", "two", "three", "four"]),
    ("What is the most likely location of this recording?",
     ["a train station", "a kitchen", "a forest", "an office"]),
    ("Which instrument enters after the drum roll?", ["piano", "violin", "trumpet", "guitar"]),
    ("Does the alarm ring before or after the crowd cheers?",
     ["before", "after", "at the same time", "there is no alarm"]),
]
SPEECH_QUESTIONS = [
    ("What does the speaker say they will buy at the market?", ["apples", "bread", "fish", "flowers"]),
    ("Which word does the second speaker repeat?", ["tomorrow", "never", "okay", "sorry"]),
    ("What is the password mentioned by the caller?", ["bluebird", "sunrise", "maple", "orbit"]),
    ("Do the two statements by the host mean the same thing?", ["same", "different"]),
    ("What number does the speaker say at the end?", ["seven", "twelve", "forty", "ninety"]),
    ("How does the speaker describe the weather?", ["sunny", "rainy", "windy", "snowy"]),
]
TRANSCRIPT_LINES = [
    "okay so I will be there tomorrow",
    "you can reach the front desk at 5550142377",
    "send the file to ops.team@example.org before noon",
    "no I said the other one, the blue one",
    "it is going to rain all weekend apparently",
    "the code is on the back of the card",
]


def spread(total_us: int, n: int, rng: np.random.Generator, cv: float = 0.35) -> list[int]:
    """``n`` positive integers with a lognormal-ish spread summing exactly to ``total_us``."""
    weights = rng.lognormal(0.0, cv, n)
    values = np.floor(weights / weights.sum() * total_us).astype(np.int64)
    values = np.maximum(values, 1)
    values[int(np.argmax(values))] += total_us - int(values.sum())
    assert values.min() > 0 and int(values.sum()) == total_us
    return values.tolist()


def _members(groups: dict[str, list[str]], spec: str) -> list[str]:
    if spec == "all":
        return sorted(sum(groups.values(), []))
    if spec == "escalated":
        return sorted(groups["relisten"] + groups["asr"] + groups["both"])
    return sorted(sum((groups[g] for g in spec.split("+")), []))


def _choose_correct(rng, ids: list[str], n_correct: int, among_initial, initial_ok: dict) -> set[str]:
    if among_initial is None:
        return set(rng.choice(ids, size=n_correct, replace=False).tolist()) if n_correct else set()
    ok0 = [i for i in ids if initial_ok[i]]
    bad0 = [i for i in ids if not initial_ok[i]]
    keep = set(rng.choice(ok0, size=among_initial, replace=False).tolist())
    fixed = set(rng.choice(bad0, size=n_correct - among_initial, replace=False).tolist())
    return keep | fixed


def _synth_spec(rng, group: str, duration: float) -> str:
    parts = [f"{duration:g}s noise"]
    if group in ("relisten", "both") or (group == "fast" and rng.random() < 0.5):
        for _ in range(int(rng.integers(1, 4))):
            length = float(rng.choice([0.5, 0.8, 1.0, 1.5]))
            at = round(float(rng.uniform(0, duration - length)), 1)
            parts.append(f"{length:g}s burst @{at:g}s")
    if group in ("asr", "both") or (group == "fast" and rng.random() < 0.5):
        length = round(min(duration, float(rng.uniform(2.0, 8.0))), 1)
        at = round(float(rng.uniform(0, duration - length)), 1)
        parts.append(f"{length:g}s speech @{at:g}s")
    return " + ".join(parts)


def build_reference(out_dir=REFERENCE_DIR) -> dict[str, Path]:
    out = Path(out_dir)
    rng = np.random.default_rng(SEED)
    ids = [f"ref-{i:04d}" for i in range(N)]
    order = rng.permutation(N)
    groups: dict[str, list[str]] = {}
    cursor = 0
    for name, size in GROUP_SIZES.items():
        groups[name] = sorted(ids[j] for j in order[cursor:cursor + size])
        cursor += size
    group_of = {sid: g for g, members in groups.items() for sid in members}

    dataset = {}
    for sid in ids:
        group = group_of[sid]
        speech = group in ("asr", "both") or (group == "fast" and rng.random() < 0.4)
        bank = SPEECH_QUESTIONS if speech else EVENT_QUESTIONS
        question, candidates = bank[int(rng.integers(len(bank)))]
        duration = float(rng.choice(np.arange(4.0, 40.5, 0.5)))
        dataset[sid] = {
            "sample_id": sid,
            "question": question,
            "candidates": list(candidates),
            "gold_answer": candidates[int(rng.integers(len(candidates)))],
            "synth": _synth_spec(rng, group, duration),
            "sample_rate": SAMPLE_RATE,
        }

    latency: dict[tuple[str, str, str], int] = {}
    for (spec, stage, scope), total in LATENCY_BUDGET_US.items():
        members = _members(groups, spec)
        for sid, us in zip(members, spread(total, len(members), rng)):
            latency[(sid, stage, scope)] = us

    correct: dict[tuple[str, str], bool] = {}
    initial_ok: dict[str, bool] = {}
    for (spec, scope), (n_ok, among) in CORRECT_COUNTS.items():
        members = _members(groups, spec)
        chosen = _choose_correct(rng, members, n_ok, among, initial_ok)
        for sid in members:
            correct[(sid, scope)] = sid in chosen
            if scope == "stage0":
                initial_ok[sid] = sid in chosen

    def answer(sid: str, ok: bool) -> str:
        rec = dataset[sid]
        if ok:
            return rec["gold_answer"]
        wrong = [c for c in rec["candidates"] if c != rec["gold_answer"]]
        return wrong[int(rng.integers(len(wrong)))]

    seg_config = SegmenterConfig()
    records = []
    for sid in ids:
        group = group_of[sid]
        rec = dataset[sid]
        key_term = sorted(content_tokens(rec["question"]))[0]
        p0 = answer(sid, correct[(sid, "stage0")])
        if group == "fast":
            s0 = f"The recording clearly contains {key_term} cues and the answer is {p0}."
        else:
            s0 = f"There is possibly some {key_term} activity but it is hard to tell; best guess {p0}."
        records.append({"sample_id": sid, "stage": "stage0", "scope": "clip", "rationale": s0, "answer": p0,
                        "latency_s": latency[(sid, "stage0", "clip")] / 1e6, "correct": correct[(sid, "stage0")]})
        records.append({"sample_id": sid, "stage": "gate", "scope": "clip", "escalate": group != "fast",
                        "note": "confident and consistent" if group == "fast" else "hedged rationale",
                        "latency_s": latency[(sid, "gate", "clip")] / 1e6})

        tools = PLAN_TOOLS[group]
        roi_index = 0
        if "relisten" in tools:
            clip = synthesize(rec["synth"], SAMPLE_RATE, sid)
            proposal = propose(clip, seg_config)
            roi = max(proposal.windows, key=lambda w: (w.energy_score or 0.0, -w.start_s))
            roi_index = roi.index
            records.append({
                "sample_id": sid, "stage": "relisten", "scope": scope_key((roi.start_s, roi.end_s)),
                "rationale": f"Within the selected segment the {key_term} is audible.",
                "answer": answer(sid, correct.get((sid, "relisten"), False)),
                "latency_s": latency[(sid, "relisten", "roi")] / 1e6,
            })
        records.append({"sample_id": sid, "stage": "plan", "scope": "clip", "roi_index": roi_index,
                        "focused_query": FOCUS_PREFIX + rec["question"], "tools": tools,
                        "asr_scope": "whole_clip", "latency_s": latency[(sid, "plan", "clip")] / 1e6})
        if "asr" in tools:
            line = TRANSCRIPT_LINES[int(rng.integers(len(TRANSCRIPT_LINES)))]
            records.append({"sample_id": sid, "stage": "asr", "scope": "clip", "transcript": line,
                            "latency_s": latency[(sid, "asr", "clip")] / 1e6})

        for scope in ("none", "relisten", "asr", "both"):
            if (sid, "reason", scope) not in latency:
                continue
            ok = correct[(sid, scope)]
            records.append({"sample_id": sid, "stage": "reason", "scope": scope, "answer": answer(sid, ok),
                            "latency_s": latency[(sid, "reason", scope)] / 1e6, "correct": ok})

    out.mkdir(parents=True, exist_ok=True)
    paths = {"dataset": out / "dataset.jsonl", "fixture": out / "fixture.jsonl", "config": out / "config.yaml"}
    write_records(paths["dataset"], (dataset[sid] for sid in ids))
    write_records(paths["fixture"], records)
    config = {
        "policies": ["baseline", "hybrid_describe_reason", "adaptive_relisten", "always_on_asr", "adaptive_asr"],
        "mode": "sim",
        "workers": 1,
        "seed": 7,
        "dataset": "dataset.jsonl",
        "fixture": "fixture.jsonl",
        "backends": {"edge": "scripted", "asr": "scripted", "cloud": "scripted", "gate": "remote",
                     "planner": "cloud"},
        "network": {"mode": "scripted", "fixed_latency": NETWORK_CALL_S, "rtt_p50": 0.015, "rtt_p95": 0.045},
    }
    header = ("# Reference run: scripted backends and constant per-round-trip network latency.\n"
              "# Targets harness arithmetic only; answers and latencies are authored, not measured.\n")
    paths["config"].write_text(header + yaml.safe_dump(config, sort_keys=False))
    return paths


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else REFERENCE_DIR
    for name, path in build_reference(target).items():
        print(f"{name}: {path}")
