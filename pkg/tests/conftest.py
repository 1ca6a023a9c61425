from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from audiocascade.backends import ScriptedAsr, ScriptedCloud, ScriptedEdge, ScriptedFixture
from audiocascade.backends.scripted import scope_key
from audiocascade.bench.dataset import synthesize
from audiocascade.bench.reference import REFERENCE_DIR
from audiocascade.domain import AudioClip, Query
from audiocascade.netcost import NetworkModel
from audiocascade.orchestrator import Backends, PipelineConfig, Sample
from audiocascade.segmenter import propose

RATE = 8000
SCRIPTED_NET = NetworkModel(mode="scripted", fixed_latency=0.1)


def clip_of(values, rate=RATE, clip_id="c"):
    return AudioClip(np.asarray(values, dtype=np.float32), rate, clip_id)


def tiny_world(n=4, *, escalate=lambda i: i % 2 == 1, tools=lambda i: ["asr", "relisten"],
               stage0_ok=lambda i: True, final_ok=lambda i, scope: True, transcript=lambda i: "hello there",
               synth="10s noise + 1s burst @2s + 3s speech @5s"):
    """A small scripted world: records for every stage and scope, answers 'yes' (gold) or 'no'."""
    records = {}
    samples = []
    for i in range(n):
        sid = f"s{i}"
        q = Query("Does the speaker say yes to the offer?", ("yes", "no"), sid)
        clip = synthesize(synth, RATE, sid)
        samples.append(Sample(q, clip, "yes"))
        proposal = propose(clip)
        roi = max(proposal.windows, key=lambda w: (w.energy_score or 0.0, -w.start_s))
        answer = lambda ok: "yes" if ok else "no"  # noqa: E731
        recs = [
            {"sample_id": sid, "stage": "stage0", "scope": "clip", "answer": answer(stage0_ok(i)),
             "rationale": "The speaker clearly answers the offer with a short reply.", "latency_s": 0.1},
            {"sample_id": sid, "stage": "gate", "scope": "clip", "escalate": escalate(i), "latency_s": 0.5},
            {"sample_id": sid, "stage": "plan", "scope": "clip", "roi_index": roi.index, "tools": tools(i),
             "focused_query": "Focus: " + q.text, "asr_scope": "whole_clip", "latency_s": 0.2},
            {"sample_id": sid, "stage": "relisten", "scope": scope_key((roi.start_s, roi.end_s)),
             "rationale": "segment evidence", "answer": "yes", "latency_s": 1.0},
            {"sample_id": sid, "stage": "asr", "scope": "clip", "transcript": transcript(i), "latency_s": 1.5},
        ]
        for scope in ("none", "relisten", "asr", "both"):
            recs.append({"sample_id": sid, "stage": "reason", "scope": scope,
                         "answer": answer(final_ok(i, scope)), "latency_s": 3.0})
        for r in recs:
            records[(r["sample_id"], r["stage"], r.get("scope", "clip"))] = r
    return ScriptedFixture(records), samples


def scripted_backends(fixture, **kw):
    return Backends(ScriptedEdge(fixture), ScriptedAsr(fixture), ScriptedCloud(fixture), **kw)


@pytest.fixture
def sim_config():
    return PipelineConfig(network=SCRIPTED_NET)


@pytest.fixture(scope="session")
def reference_dir() -> Path:
    return REFERENCE_DIR


@pytest.fixture(scope="session")
def reference_fixture(reference_dir):
    return ScriptedFixture.load(reference_dir / "fixture.jsonl")


def write_world(directory: Path, n=4, synth="10s noise + 1s burst @2s + 3s speech @5s", **kw):
    """Write a :func:`tiny_world` to disk as a dataset + fixture pair."""
    import json

    fixture, samples = tiny_world(n, synth=synth, **kw)
    directory.mkdir(parents=True, exist_ok=True)
    dataset = directory / "dataset.jsonl"
    with open(dataset, "w") as fh:
        for s in samples:
            fh.write(json.dumps({"sample_id": s.query.sample_id, "question": s.query.text,
                                 "candidates": list(s.query.candidates), "gold_answer": s.gold,
                                 "synth": synth, "sample_rate": RATE}) + "\n")
    fixture_path = directory / "fixture.jsonl"
    fixture.dump(fixture_path)
    return dataset, fixture_path


# one verdict line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
