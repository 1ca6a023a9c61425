"""Exit criteria, each reduced to one PASS/FAIL line."""

import copy
import time
from dataclasses import replace

import numpy as np
import pytest

from audiocascade.backends import RemoteCloudController, ScriptedAsr, ScriptedEdge, ScriptedFixture
from audiocascade.bench.dataset import load_dataset, synthesize
from audiocascade.bench.report import compare_policies, score
from audiocascade.bench.runner import load_config, run_policies, write_traces
from audiocascade.mockcloud import running
from audiocascade.netcost import NetworkModel, sample_rng, sample_rtts
from audiocascade.orchestrator import POLICIES, Backends, run_dataset
from audiocascade.privacy import inspect_cloud_payload
from audiocascade.segmenter import energy_events, fixed_windows

from conftest import ACCEPTANCE_RESULTS, scripted_backends, tiny_world

pytestmark = pytest.mark.acceptance

TABLE1 = {
    "baseline": (0.2720, 0.155),
    "hybrid_describe_reason": (0.3930, 2.866),
    "adaptive_relisten": (0.4310, 6.446),
    "always_on_asr": (0.5170, 11.058),
    "adaptive_asr": (0.5360, 9.617),
}
TABLE2 = {"edge_perception": 0.16, "network": 0.20, "cloud_gate": 0.60, "tools": 1.85, "cloud_reason": 6.81,
          "total": 9.62}
PATHS = {"fast": 0.382, "relisten_only": 0.274, "asr_only": 0.197, "both": 0.147}
SENTINEL_PHONE = "99887766554433"
SENTINEL_EMAIL = "leak.sentinel@pii.example"


def verdict(n, checks):
    """Record and print a criterion verdict, then fail with the first broken check."""
    failed = [name for name, ok in checks if not ok]
    detail = "all checks hold" if not failed else "broken: " + "; ".join(failed)
    ACCEPTANCE_RESULTS[n] = (not failed, detail)
    print(f"criterion {n}: {'PASS' if not failed else 'FAIL'}  {detail}")
    assert not failed, detail


@pytest.fixture(scope="module")
def ref_config(reference_dir):
    return load_config(reference_dir / "config.yaml")


@pytest.fixture(scope="module")
def ref_records(ref_config):
    return load_dataset(ref_config.dataset)


@pytest.fixture(scope="module")
def ref_five(ref_config, ref_records, reference_fixture):
    return run_policies(ref_config, ref_records, scripted_backends(reference_fixture))


def test_criterion_1_latency_breakdown(ref_config, ref_records, reference_fixture):
    t0 = time.perf_counter()
    (result,) = run_policies(ref_config, ref_records, scripted_backends(reference_fixture), ["adaptive_asr"])
    elapsed = time.perf_counter() - t0
    table = result.report.breakdown
    checks = [(f"{k} {table[k]:.4f} vs {v}", abs(table[k] - v) <= 0.005) for k, v in TABLE2.items()]
    checks.append((f"runtime {elapsed:.1f}s", elapsed < 10))
    checks.append(("1000 samples", result.report.n_samples == 1000))
    verdict(1, checks)


def test_criterion_2_policy_table(ref_five):
    reports = {r.policy: r.report for r in ref_five}
    checks = []
    for name, (acc, lat) in TABLE1.items():
        r = reports[name]
        checks.append((f"{name} accuracy {r.accuracy:.4f} vs {acc}", abs(r.accuracy - acc) <= 0.0005))
        checks.append((f"{name} latency {r.mean_latency_s:.4f} vs {lat}", abs(r.mean_latency_s - lat) <= 0.005))
    rows = {row.policy: row for row in compare_policies(list(reports.values()))}
    checks.append(("always_on_asr dominated by adaptive_asr", "adaptive_asr" in rows["always_on_asr"].dominated_by))
    checks.append(("adaptive_asr not dominated", not rows["adaptive_asr"].dominated))
    verdict(2, checks)


def test_criterion_3_path_distribution(ref_five):
    r = next(x.report for x in ref_five if x.policy == "adaptive_asr")
    checks = [(f"{k} {r.path_distribution[k]} vs {v}", abs(r.path_distribution[k] - v) < 1e-12) for k, v in PATHS.items()]
    checks.append(("no reason_only", r.path_distribution["reason_only"] == 0))
    checks.append((f"escalation {r.escalation_rate:.4f}", f"{r.escalation_rate:.4f}" == "0.6180"))
    verdict(3, checks)


def _oracle_fixed(d):
    if d < 3.0:
        return [(0.0, d)]
    if d < 12.0:
        g = (d - 3.0) / 3
        return [(k * g, k * g + 3.0) for k in range(4)]
    return [(f * d, min(d, f * d + 3.0)) for f in (0.1, 0.3, 0.5, 0.7)]


def test_criterion_4_segmenter():
    checks = []
    starts = [w.start_s for w in fixed_windows(60.0)]
    checks.append((f"60s starts {starts}", np.allclose(starts, [6, 18, 30, 42], atol=1e-9)))

    sweep_ok = True
    for step in range(1, 1201):
        d = step * 0.5
        ws = fixed_windows(d)
        in_bounds = all(0 <= w.start_s < w.end_s <= d + 1e-9 for w in ws)
        count_ok = len(ws) == 1 and (ws[0].start_s, ws[0].end_s) == (0.0, d) if d < 3 else len(ws) == 4
        sweep_ok &= in_bounds and count_ok
    checks.append(("0.5-600s sweep", sweep_ok))

    burst_ok = True
    for spec, truth in [("10s silence + 1s burst @2s", [(2, 3)]), ("10s noise + 1s burst @2s", [(2, 3)]),
                        ("10s silence + 1s burst @2s + 1s burst @6s", [(2, 3), (6, 7)]),
                        ("30s noise + 0.5s burst @10s + 2s burst @20s", [(10, 10.5), (20, 22)])]:
        for rate in (8000, 16000):
            evs = energy_events(synthesize(spec, rate, "a4"))
            burst_ok &= len(evs) == len(truth) and all(
                abs(e.start_s - s) <= 0.01 and abs(e.end_s - t) <= 0.01 for e, (s, t) in zip(evs, truth))
    checks.append(("bursts within one hop", burst_ok))

    rng = np.random.default_rng(4)
    oracle_ok = all(
        np.allclose([(w.start_s, w.end_s) for w in fixed_windows(float(d))], _oracle_fixed(float(d)), atol=1e-9)
        for d in rng.uniform(0.05, 900.0, 10_000))
    checks.append(("brute-force oracle on 10^4 durations", oracle_ok))
    verdict(4, checks)


@pytest.fixture(scope="module")
def sentinel_fixture(reference_fixture):
    records = copy.deepcopy(reference_fixture.records)
    for key, rec in records.items():
        if key[1] == "asr":
            rec["transcript"] += f" Call {SENTINEL_PHONE} or write to {SENTINEL_EMAIL}."
    return ScriptedFixture(records)


@pytest.fixture(scope="module")
def mock_wire_run(tmp_path_factory, ref_config, ref_records, sentinel_fixture):
    capture = tmp_path_factory.mktemp("wire") / "capture.jsonl"
    config = replace(ref_config, workers=8)
    with running(sentinel_fixture, capture_path=str(capture)) as server:
        remote = Backends(ScriptedEdge(sentinel_fixture), ScriptedAsr(sentinel_fixture),
                          RemoteCloudController(server.url))
        results = run_policies(config, ref_records, remote)
        captured = list(server.captured)
    local = run_policies(config, ref_records, scripted_backends(sentinel_fixture))
    return results, captured, capture.read_bytes(), local


def test_criterion_5_privacy(mock_wire_run, ref_records):
    results, captured, capture_bytes, _ = mock_wire_run
    n_msgs = len(captured)
    expected = sum(len(t.wire) for r in results for t in r.traces)
    failures = [m for m in captured if not inspect_cloud_payload(m).ok]
    raw_bytes = {r.sample_id: r.load_clip().pcm16_bytes for r in ref_records}
    too_big = [(t.sample_id, r.policy) for r in results for t in r.traces
               if t.ledger.cloud_bound_bytes >= raw_bytes[t.sample_id]]
    verdict(5, [
        (f"captured {n_msgs} of {expected} messages", n_msgs == expected > 0),
        (f"{len(failures)} messages fail inspection", not failures),
        ("no privacy violations reported", all(r.report.privacy_violations == 0 for r in results)),
        ("sentinel phone absent", SENTINEL_PHONE.encode() not in capture_bytes),
        ("sentinel email absent", SENTINEL_EMAIL.encode() not in capture_bytes),
        ("redacted transcripts did travel", b"[REDACTED]" in capture_bytes),
        (f"{len(too_big)} samples upload >= raw clip bytes", not too_big),
    ])


def test_criterion_6_determinism(tmp_path, ref_config, ref_records, reference_fixture, ref_five, mock_wire_run):
    checks = []
    backends = scripted_backends(reference_fixture)

    def trace_bytes(results, tag):
        out = []
        for r in results:
            path = tmp_path / f"{tag}.{r.policy}.jsonl"
            write_traces(path, r.traces)
            out.append(path.read_bytes())
        return out

    # reference config (scripted network), all five policies
    base = trace_bytes(ref_five, "w1a")
    checks.append(("reruns at workers=1 identical",
                   base == trace_bytes(run_policies(ref_config, ref_records, backends, workers=1), "w1b")))
    w8 = [trace_bytes(run_policies(ref_config, ref_records, backends, workers=8), f"w8{k}") for k in "ab"]
    checks.append(("reruns at workers=8 identical", w8[0] == w8[1]))
    checks.append(("workers=1 equals workers=8", base == w8[0]))

    # seeded lognormal network: RTT draws must not depend on scheduling
    net_cfg = replace(ref_config, pipeline=replace(ref_config.pipeline, network=NetworkModel(seed=11)))
    tool_policies = ["always_on_asr", "adaptive_asr"]
    runs = [trace_bytes(run_policies(net_cfg, ref_records, backends, tool_policies, workers=w), f"ln{w}{k}")
            for w, k in ((1, "a"), (1, "b"), (8, "a"), (8, "b"))]
    checks.append(("lognormal reruns and worker counts identical", all(r == runs[0] for r in runs)))

    remote_results, _, _, local = mock_wire_run
    checks.append(("mock-cloud traces equal in-process traces",
                   trace_bytes(remote_results, "remote") == trace_bytes(local, "local")))
    checks.append(("mock-cloud wire bytes equal in-process wire bytes",
                   [t.wire for r in remote_results for t in r.traces] == [t.wire for r in local for t in r.traces]))
    verdict(6, checks)


def test_criterion_7_tool_noise(sim_config):
    flips = {1, 4, 6, 9, 13}
    n = 16
    fixture, samples = tiny_world(
        n,
        escalate=lambda i: i % 3 == 0,
        stage0_ok=lambda i: i < 14,
        final_ok=lambda i, scope: scope == "none" or i not in flips,
    )
    backends = scripted_backends(fixture)
    gold = {s.query.sample_id: s.gold for s in samples}
    regressions = {name: score(run_dataset(samples, POLICIES[name], backends, sim_config), gold, name).regressions
                   for name in ("baseline", "always_on_asr", "adaptive_asr")}
    k = len([i for i in flips if i < 14])
    verdict(7, [
        (f"always_on_asr regressions {regressions['always_on_asr']} vs k={k}", regressions["always_on_asr"] == k),
        (f"baseline regressions {regressions['baseline']}", regressions["baseline"] == 0),
        (f"adaptive_asr {regressions['adaptive_asr']} <= always_on_asr",
         regressions["adaptive_asr"] <= regressions["always_on_asr"]),
        ("adaptive_asr only regresses escalated flips",
         regressions["adaptive_asr"] == len([i for i in flips if i < 14 and i % 3 == 0])),
    ])


def test_criterion_8_network_model():
    t0 = time.perf_counter()
    model = NetworkModel(rtt_p50=0.015, rtt_p95=0.045, seed=8)
    draws = sample_rtts(model, sample_rng(model.seed, "criterion-8"), 1_000_000)
    p50, p95 = np.quantile(draws, [0.5, 0.95])
    elapsed = time.perf_counter() - t0
    verdict(8, [
        (f"p50 {p50:.5f}", abs(p50 / 0.015 - 1) < 0.02),
        (f"p95 {p95:.5f}", abs(p95 / 0.045 - 1) < 0.02),
        (f"runtime {elapsed:.2f}s", elapsed < 5),
    ])
