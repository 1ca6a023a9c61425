"""Run-configuration loading, experiment execution and trace/report files."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import yaml

from audiocascade.backends import (
    RemoteCloudController,
    ScriptedAsr,
    ScriptedCloud,
    ScriptedEdge,
    ScriptedFixture,
)
from audiocascade.backends.remote import ENDPOINT_ENV
from audiocascade.bench import report as rep
from audiocascade.bench.dataset import DatasetRecord, load_dataset
from audiocascade.gate import GateConfig
from audiocascade.netcost import NetworkModel
from audiocascade.orchestrator import (
    POLICY_ORDER,
    Backends,
    PipelineConfig,
    TraceRecord,
    get_policy,
    run_dataset,
)
from audiocascade.privacy import RedactionPolicy
from audiocascade.segmenter import SegmenterConfig

log = logging.getLogger(__name__)

CONFIG_KEYS = {"policies", "mode", "workers", "seed", "dataset", "fixture", "backends", "network",
               "segmenter", "gate", "redaction", "privacy"}
BACKEND_KEYS = {"edge", "asr", "cloud", "cloud_url", "gate", "planner", "timeout_s"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    policies: tuple[str, ...] = POLICY_ORDER
    mode: str = "sim"
    workers: int = 1
    dataset: Optional[Path] = None
    fixture: Optional[Path] = None
    backends: dict = field(default_factory=lambda: {"edge": "scripted", "asr": "scripted", "cloud": "scripted",
                                                    "gate": "remote", "planner": "cloud"})
    pipeline: PipelineConfig = PipelineConfig()

    @property
    def seed(self) -> int:
        return self.pipeline.network.seed

    def with_seed(self, seed: int) -> RunConfig:
        net = replace(self.pipeline.network, seed=seed)
        return replace(self, pipeline=replace(self.pipeline, network=net))


def _resolve(base: Path, value) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, path.parent, str(path))


def config_from_dict(raw: dict, base: Path = Path("."), where: str = "<config>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        policies = tuple(raw.get("policies", POLICY_ORDER))
        for name in policies:
            get_policy(name)
        backends = {"edge": "scripted", "asr": "scripted", "cloud": "scripted", "gate": "remote",
                    "planner": "cloud", **(raw.get("backends") or {})}
        bad = set(backends) - BACKEND_KEYS
        if bad:
            raise ConfigError(f"unknown backend keys {sorted(bad)}")

        net_block = dict(raw.get("network") or {})
        if "seed" in raw:
            net_block["seed"] = int(raw["seed"])
        network = NetworkModel.from_dict(net_block)

        seg_block = dict(raw.get("segmenter") or {})
        if "percentile_anchors" in seg_block:
            seg_block["percentile_anchors"] = tuple(seg_block["percentile_anchors"])
        segmenter = SegmenterConfig(**seg_block)

        gate_block = dict(raw.get("gate") or {})
        if "hedging_lexicon" in gate_block:
            gate_block["hedging_lexicon"] = frozenset(gate_block["hedging_lexicon"])
        gate = GateConfig(**gate_block)

        privacy_block = raw.get("privacy") or {}
        pipeline = PipelineConfig(
            segmenter=segmenter, gate=gate, network=network,
            redaction=RedactionPolicy.from_dict(raw.get("redaction")),
            mode=raw.get("mode", "sim"),
            blob_limit=int(privacy_block.get("blob_limit", 4096)),
        )
        workers = int(raw.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return RunConfig(policies, pipeline.mode, workers, _resolve(base, raw.get("dataset")),
                     _resolve(base, raw.get("fixture")), backends, pipeline)


def build_backends(config: RunConfig, fixture: Optional[ScriptedFixture]) -> Backends:
    spec = config.backends
    needs_fixture = "scripted" in (spec.get("edge"), spec.get("asr"), spec.get("cloud"))
    if needs_fixture and fixture is None:
        raise ConfigError("scripted backends need a fixture")
    if spec.get("edge") != "scripted":
        raise ConfigError(f"edge backend {spec.get('edge')!r} is not available; only 'scripted' ships")
    edge = ScriptedEdge(fixture)
    asr = ScriptedAsr(fixture) if spec.get("asr") == "scripted" else None
    cloud_kind = spec.get("cloud")
    if cloud_kind == "scripted":
        cloud = ScriptedCloud(fixture)
    elif cloud_kind == "remote":
        url = spec.get("cloud_url") or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ConfigError(f"remote cloud needs backends.cloud_url or ${ENDPOINT_ENV}")
        cloud = RemoteCloudController(url, timeout=float(spec.get("timeout_s", 30.0)))
    elif cloud_kind in (None, "none"):
        cloud = None
    else:
        raise ConfigError(f"unknown cloud backend {cloud_kind!r}")
    return Backends(edge, asr, cloud, gate_mode=spec.get("gate", "remote"), planner=spec.get("planner", "cloud"))


def write_traces(path, traces: Sequence[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def read_traces(path) -> list[TraceRecord]:
    with open(path, encoding="utf-8") as fh:
        return [TraceRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_wire_log(path, traces: Sequence[TraceRecord]) -> None:
    with open(path, "wb") as fh:
        for t in traces:
            for message in t.wire:
                fh.write(message)


@dataclass
class PolicyResult:
    policy: str
    traces: list[TraceRecord]
    report: rep.RunReport


def run_policies(config: RunConfig, records: Sequence[DatasetRecord], backends: Backends,
                 policies: Optional[Sequence[str]] = None, workers: Optional[int] = None) -> list[PolicyResult]:
    samples = [r.to_sample() for r in records]
    gold = {r.sample_id: r.gold_answer for r in records}
    results = []
    for name in policies or config.policies:
        policy = get_policy(name)
        traces = run_dataset(samples, policy, backends, config.pipeline, workers or config.workers)
        results.append(PolicyResult(name, traces, rep.score(traces, gold, name)))
        log.info("policy %s done: accuracy %.4f, mean %.3fs", name, results[-1].report.accuracy,
                 results[-1].report.mean_latency_s)
    return results


def write_outputs(out_dir, results: Sequence[PolicyResult]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        write_traces(out / f"{r.policy}.traces.jsonl", r.traces)
        write_wire_log(out / f"{r.policy}.wire.jsonl", r.traces)
        (out / f"{r.policy}.report.json").write_text(json.dumps(r.report.to_dict(), indent=2, sort_keys=True) + "\n")
    write_summary(out, [r.report for r in results])


def write_summary(out: Path, reports: Sequence[rep.RunReport]) -> str:
    tables = {r.policy: r.breakdown for r in reports}
    (out / "breakdown.csv").write_text(rep.breakdown_csv(tables))
    text = "".join(rep.report_text(r) for r in reports)
    for r in reports:
        text += "\n" + rep.breakdown_text(r.policy, r.breakdown)
    if len(reports) >= 2:
        rows = rep.compare_policies(reports)
        (out / "tradeoff.csv").write_text(rep.tradeoff_csv(rows, {r.policy: r for r in reports}))
        text = rep.tradeoff_text(rows) + "\n" + text
    (out / "summary.txt").write_text(text)
    return text


def run_experiment(config: RunConfig, out_dir=None, backends: Optional[Backends] = None) -> list[PolicyResult]:
    if config.dataset is None:
        raise ConfigError("no dataset given")
    records = load_dataset(config.dataset)
    fixture = None
    if config.fixture is not None:
        fixture = ScriptedFixture.load(config.fixture)
        fixture.check_complete(r.sample_id for r in records)
    elif config.mode == "sim":
        raise ConfigError("simulation mode needs a fixture")
    if backends is None:
        backends = build_backends(config, fixture)
    results = run_policies(config, records, backends)
    if out_dir is not None:
        write_outputs(out_dir, results)
    return results
