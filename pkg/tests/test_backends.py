import json
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from audiocascade.backends import (
    NetworkError,
    ProtocolError,
    RemoteCloudController,
    ScriptedAsr,
    ScriptedCloud,
    ScriptedEdge,
    ScriptedFixture,
)
from audiocascade.backends.planner import FOCUS_PREFIX, is_speech_heavy, reference_plan
from audiocascade.backends.protocol import decode, encode, validate_request, validate_response
from audiocascade.backends.scripted import FixtureError, FixtureMiss, evidence_scope, scope_key, write_records
from audiocascade.domain import Query, RoiWindow, SegmentProposal
from audiocascade.mockcloud import running

from conftest import clip_of

RECS = [
    {"sample_id": "s1", "stage": "stage0", "rationale": "a dog barks", "answer": "dog", "latency_s": 0.155},
    {"sample_id": "s1", "stage": "gate", "escalate": True, "latency_s": 0.6},
    {"sample_id": "s1", "stage": "plan", "roi_index": 2, "tools": ["asr"], "focused_query": "f",
     "asr_scope": "whole_clip", "latency_s": 0.1},
    {"sample_id": "s1", "stage": "asr", "transcript": "woof", "latency_s": 1.0},
    {"sample_id": "s1", "stage": "reason", "scope": "asr", "answer": "dog", "latency_s": 6.0},
    {"sample_id": "s2", "stage": "stage0", "rationale": "", "answer": "cat", "latency_s": 0.1},
    {"sample_id": "s2", "stage": "gate", "escalate": False, "latency_s": 0.6},
    {"sample_id": "s2", "stage": "plan", "roi_index": 0, "tools": ["relisten"], "focused_query": "f",
     "asr_scope": "whole_clip", "latency_s": 0.1},
    {"sample_id": "s2", "stage": "relisten", "scope": "window:6.000-9.000", "rationale": "scoped", "answer": "cat",
     "latency_s": 0.2},
    {"sample_id": "s2", "stage": "reason", "scope": "relisten", "answer": "cat", "latency_s": 6.0},
]
WINDOWS = [{"index": i, "start_s": 3.0 * i, "end_s": 3.0 * i + 3, "source": "fixed_window"} for i in range(4)]


@pytest.fixture
def fixture_path(tmp_path):
    path = tmp_path / "fx.jsonl"
    write_records(path, RECS)
    return path


@pytest.fixture
def fixture(fixture_path):
    return ScriptedFixture.load(fixture_path)


def gate_req(sid="s1"):
    return {"v": 1, "type": "gate", "sample_id": sid, "s0": "a dog barks", "p0": "dog",
            "query_text": "What animal?", "candidates": ["dog", "cat"]}


def plan_req(sid="s1"):
    return {"v": 1, "type": "plan", "sample_id": sid, "s0": "a dog barks", "query_text": "What animal?",
            "windows": WINDOWS}


def reason_req(sid="s1"):
    return {"v": 1, "type": "reason", "sample_id": sid, "s0": "x", "p0": "dog", "query_text": "What animal?",
            "candidates": ["dog", "cat"], "t_text": "woof"}


class TestScripted:
    def test_edge_latency_from_fixture(self, fixture):
        res = ScriptedEdge(fixture).infer(clip_of(np.zeros(80), clip_id="s1"), Query("What?", (), "s1"))
        assert res.measured_latency == 0.155 and res.answer == "dog"

    def test_empty_rationale_passes_through(self, fixture):
        assert ScriptedEdge(fixture).infer(clip_of(np.zeros(80), clip_id="s2"), Query("What?")).rationale == ""

    def test_window_scoped_record(self, fixture):
        clip = clip_of(np.zeros(8000 * 10), clip_id="s2")
        res = ScriptedEdge(fixture).infer(clip, Query("What?"), (6.0, 9.0))
        assert res.rationale == "scoped" and res.scope == (6.0, 9.0)

    def test_asr(self, fixture):
        assert ScriptedAsr(fixture).transcribe(clip_of(np.zeros(8), clip_id="s1"), None) == ("woof", 1.0)

    def test_miss_names_sample_and_stage(self, fixture):
        with pytest.raises(FixtureMiss) as err:
            ScriptedEdge(fixture).infer(clip_of(np.zeros(8), clip_id="s9"), Query("What?"))
        assert "s9" in str(err.value) and "stage0" in str(err.value)

    def test_scope_keys(self):
        assert scope_key(None) == "clip"
        assert scope_key((6, 9)) == "window:6.000-9.000"
        assert [evidence_scope(t) for t in ([], ["relisten"], ["asr"], ["asr", "relisten"])] == \
            ["none", "relisten", "asr", "both"]

    def test_missing_investigate_record_rejected_at_load(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        write_records(path, [r for r in RECS if not (r["sample_id"] == "s1" and r["stage"] == "asr")])
        with pytest.raises(FixtureError, match="s1"):
            ScriptedFixture.load(path)

    def test_missing_stage0_rejected(self, tmp_path, fixture):
        fixture.check_complete(["s1", "s2"])
        with pytest.raises(FixtureError, match="s3"):
            fixture.check_complete(["s1", "s3"])

    @pytest.mark.parametrize("line", ['{"sample_id": "s1"', '{"sample_id": "s1", "stage": "stage0", "bogus": 1}',
                                      '{"sample_id": "s1", "stage": "dance"}'])
    def test_malformed_rows(self, tmp_path, line):
        path = tmp_path / "m.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(FixtureError):
            ScriptedFixture.load(path, check=False)

    def test_duplicate_row(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_records(path, RECS + RECS[:1])
        with pytest.raises(FixtureError):
            ScriptedFixture.load(path)

    def test_dump_roundtrip(self, tmp_path, fixture):
        out = tmp_path / "again.jsonl"
        fixture.dump(out)
        assert ScriptedFixture.load(out).records == fixture.records


class TestProtocol:
    def test_gate_roundtrip(self, fixture):
        resp = ScriptedCloud(fixture).call("gate", gate_req())
        assert resp["escalate"] is True

    def test_plan_roundtrip(self, fixture):
        resp = ScriptedCloud(fixture).call("plan", plan_req())
        assert 0 <= resp["roi_index"] <= 3 and resp["tools"] == ["asr"]

    def test_plan_out_of_range(self):
        bad = {"v": 1, "roi_index": 9, "tools": ["asr"], "focused_query": "f", "asr_scope": "whole_clip"}
        with pytest.raises(ProtocolError, match="roi_index"):
            validate_response("plan", bad, plan_req())

    @pytest.mark.parametrize("patch", [{"tools": []}, {"tools": ["sonar"]}, {"asr_scope": "half"}])
    def test_plan_bad_fields(self, patch):
        good = {"v": 1, "roi_index": 1, "tools": ["asr"], "focused_query": "f", "asr_scope": "whole_clip"}
        with pytest.raises(ProtocolError):
            validate_response("plan", {**good, **patch}, plan_req())

    @pytest.mark.parametrize("patch", [{"v": 2}, {"type": "plan"}, {"candidates": "dog"}, {"extra": 1},
                                       {"s0": None}])
    def test_request_schema_violations(self, patch):
        with pytest.raises(ProtocolError):
            validate_request("gate", {**gate_req(), **patch})

    def test_missing_field(self):
        req = gate_req()
        del req["p0"]
        with pytest.raises(ProtocolError):
            validate_request("gate", req)

    def test_remote_error_message(self):
        with pytest.raises(ProtocolError, match="boom"):
            validate_response("gate", {"v": 1, "error": "boom"})

    def test_encode_is_canonical(self):
        a = encode({"b": 1, "a": [1, 2]})
        assert a == b'{"a":[1,2],"b":1}\n'
        assert decode(a) == {"a": [1, 2], "b": 1}
        with pytest.raises(ProtocolError):
            decode(b"not json")


class TestMockCloud:
    def test_roundtrip_matches_in_process(self, fixture, tmp_path):
        capture = tmp_path / "cap.jsonl"
        with running(fixture, capture_path=str(capture)) as server:
            remote = RemoteCloudController(server.url)
            local = ScriptedCloud(fixture)
            for endpoint, req in (("gate", gate_req()), ("plan", plan_req()), ("reason", reason_req())):
                assert remote.call(endpoint, req) == local.call(endpoint, req)
            assert len(server.captured) == 3
        assert [json.loads(line)["type"] for line in capture.read_text().splitlines()] == ["gate", "plan", "reason"]

    def test_unknown_sample_is_protocol_error(self, fixture):
        with running(fixture) as server:
            with pytest.raises(ProtocolError, match="404"):
                RemoteCloudController(server.url).call("gate", gate_req("nobody"))

    def test_concurrent_clients(self, fixture):
        with running(fixture) as server:
            remote = RemoteCloudController(server.url)
            results = []

            def worker():
                results.append(remote.call("gate", gate_req())["escalate"])

            threads = [threading.Thread(target=worker) for _ in range(16)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        assert results == [True] * 16

    def test_dead_endpoint_is_network_error(self, fixture):
        with running(fixture) as server:
            url = server.url
        with pytest.raises(NetworkError):
            RemoteCloudController(url, timeout=1, retries=1, backoff_s=0).call("gate", gate_req())

    def test_bad_url(self):
        with pytest.raises(ValueError):
            RemoteCloudController("ftp://somewhere")


def proposal_of(specs, duration=30.0):
    return SegmentProposal("c", tuple(RoiWindow(i, s, e, src, en) for i, (s, e, src, en) in enumerate(specs)), duration)


class TestReferencePlanner:
    def test_speech_heavy_query_gets_asr(self):
        prop = proposal_of([(0, 3, "fixed_window", None), (5, 6, "energy_event", 0.4)])
        plan = reference_plan(prop, "s0", Query("What is the wifi password?"))
        assert "asr" in plan.tools and plan.roi_index == 1
        assert plan.focused_query == FOCUS_PREFIX + "What is the wifi password?"

    def test_non_speech_gets_relisten(self):
        prop = proposal_of([(0, 3, "fixed_window", None), (9, 12, "fixed_window", None)])
        plan = reference_plan(prop, "s0", Query("How many bells ring?"))
        assert plan.tools == {"relisten"} and plan.roi_index == 0

    def test_speech_without_events_is_asr_only(self):
        prop = proposal_of([(0, 3, "fixed_window", None)])
        assert reference_plan(prop, "s0", Query("What did she say?")).tools == {"asr"}

    def test_keyword_prefix_boundary(self):
        assert is_speech_heavy("What does the speaker want?")
        assert not is_speech_heavy("Is it essay music?")

    @given(st.permutations(range(5)))
    def test_tie_break_independent_of_order(self, perm):
        base = [(1.0 + i, 2.0 + i, "energy_event", 0.5 if i in (1, 3) else 0.2) for i in range(5)]
        shuffled = [base[i] for i in perm]
        plan = reference_plan(proposal_of(shuffled), "s0", Query("How many knocks?"))
        assert shuffled[plan.roi_index][0] == 2.0
