"""Scoring, latency breakdowns and policy trade-off tables.

Everything here is computed from trace records alone, so a report can be
regenerated from a trace log without rerunning the pipeline.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from audiocascade.domain import STAGES, from_us
from audiocascade.orchestrator import TraceRecord, answers_match

PATH_CLASSES = ("fast", "relisten_only", "asr_only", "both", "reason_only")

# Fold of ledger stages into the five-line latency breakdown
BREAKDOWN_GROUPS = {
    "edge_perception": ("edge_perception",),
    "network": ("network",),
    "cloud_gate": ("cloud_gate", "cloud_plan"),
    "tools": ("tool_relisten", "tool_asr"),
    "cloud_reason": ("cloud_reason",),
}


class ScoringError(KeyError):
    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class RunReport:
    policy: str
    n_samples: int
    accuracy: float
    mean_latency_s: float
    p50_latency_s: float
    p95_latency_s: float
    stage_mean_latencies: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)
    path_distribution: dict = field(default_factory=dict)
    escalation_rate: float = 0.0
    privacy_violations: int = 0
    failures: int = 0
    regressions: int = 0
    tools_dropped: int = 0
    mean_cloud_bound_bytes: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> RunReport:
        return cls(**d)


def _stage_means_us(traces: Sequence[TraceRecord]) -> dict[str, float]:
    sums = {s: 0 for s in STAGES}
    for t in traces:
        for stage, us in t.ledger.stage_totals_us().items():
            sums[stage] += us
    return {s: sums[s] / len(traces) for s in STAGES}


def breakdown(traces: Sequence[TraceRecord], fold_plan: bool = True) -> dict[str, float]:
    """Per-stage mean latency over all samples, plus a ``total`` row.

    Samples that skip a stage contribute zero to it. With ``fold_plan``
    the rows follow the five-line grouping (planning counted with the gate,
    both tools on one line); otherwise every ledger stage gets its own row.
    """
    if not traces:
        raise ValueError("breakdown needs at least one trace")
    means = _stage_means_us(traces)
    if fold_plan:
        rows = {name: sum(means[s] for s in group) for name, group in BREAKDOWN_GROUPS.items()}
    else:
        rows = dict(means)
    out = {name: from_us(v) for name, v in rows.items()}
    out["total"] = from_us(sum(rows.values()))
    return out


def score(traces: Sequence[TraceRecord], gold: Mapping[str, str], policy: str = "") -> RunReport:
    if not traces:
        raise ValueError("score needs at least one trace")
    for t in traces:
        if t.sample_id not in gold:
            raise ScoringError(f"no gold answer for sample {t.sample_id!r}")
    n = len(traces)
    correct = 0
    regressions = 0
    paths = {k: 0 for k in PATH_CLASSES}
    completed = 0
    for t in traces:
        final_ok = bool(answers_match(t.verdict.answer, gold[t.sample_id])) if t.verdict else False
        initial_ok = bool(answers_match(t.initial_answer, gold[t.sample_id]))
        correct += final_ok
        regressions += initial_ok and not final_ok
        if t.verdict is not None:
            paths[t.verdict.path_class] += 1
            completed += 1

    totals = np.array([t.ledger.total_us for t in traces], dtype=np.int64)
    distribution = {k: (v / completed if completed else 0.0) for k, v in paths.items()}
    return RunReport(
        policy=policy,
        n_samples=n,
        accuracy=correct / n,
        mean_latency_s=from_us(int(totals.sum())) / n,
        p50_latency_s=from_us(float(np.percentile(totals, 50))),
        p95_latency_s=from_us(float(np.percentile(totals, 95))),
        stage_mean_latencies={k: from_us(v) for k, v in _stage_means_us(traces).items()},
        breakdown=breakdown(traces),
        path_distribution=distribution,
        escalation_rate=(1.0 - distribution["fast"]) if completed else 0.0,
        privacy_violations=sum(t.error_kind == "privacy_violation" for t in traces),
        failures=sum(t.verdict is None for t in traces),
        regressions=regressions,
        tools_dropped=sum(bool(t.tools_dropped) for t in traces),
        mean_cloud_bound_bytes=sum(t.ledger.cloud_bound_bytes for t in traces) / n,
    )


@dataclass(frozen=True)
class TradeoffRow:
    policy: str
    accuracy: float
    mean_latency_s: float
    dominated_by: tuple[str, ...] = ()

    @property
    def dominated(self) -> bool:
        return bool(self.dominated_by)


def compare_policies(reports: Sequence[RunReport]) -> list[TradeoffRow]:
    """Accuracy/latency table sorted by latency, with Pareto-dominated rows flagged.

    A row is dominated when another row is strictly better on both axes.
    """
    if len(reports) < 2:
        raise ValueError("compare_policies needs at least two reports")
    rows = []
    for r in reports:
        dominators = tuple(
            o.policy for o in reports
            if o is not r and o.accuracy > r.accuracy and o.mean_latency_s < r.mean_latency_s
        )
        rows.append(TradeoffRow(r.policy, r.accuracy, r.mean_latency_s, dominators))
    rows.sort(key=lambda row: (row.mean_latency_s, row.policy))
    return rows


def tradeoff_csv(rows: Sequence[TradeoffRow], reports: Optional[Mapping[str, RunReport]] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "accuracy", "mean_latency_s", "p50_latency_s", "p95_latency_s", "dominated_by"])
    for row in rows:
        rep = reports.get(row.policy) if reports else None
        w.writerow([
            row.policy, f"{row.accuracy:.4f}", f"{row.mean_latency_s:.3f}",
            f"{rep.p50_latency_s:.3f}" if rep else "", f"{rep.p95_latency_s:.3f}" if rep else "",
            ";".join(row.dominated_by),
        ])
    return buf.getvalue()


def tradeoff_text(rows: Sequence[TradeoffRow]) -> str:
    lines = [f"{'policy':<24} {'acc':>8} {'cost (s)':>9}  note", "-" * 56]
    for row in rows:
        note = f"dominated by {', '.join(row.dominated_by)}" if row.dominated else ""
        lines.append(f"{row.policy:<24} {row.accuracy * 100:>7.2f}% {row.mean_latency_s:>9.3f}  {note}".rstrip())
    return "\n".join(lines) + "\n"


def breakdown_csv(tables: Mapping[str, Mapping[str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "component", "latency_s"])
    for policy, table in tables.items():
        for component, value in table.items():
            w.writerow([policy, component, f"{value:.3f}"])
    return buf.getvalue()


def breakdown_text(policy: str, table: Mapping[str, float]) -> str:
    lines = [f"latency breakdown: {policy}", f"{'component':<18} {'latency (s)':>11}", "-" * 30]
    for component, value in table.items():
        if component == "total":
            lines.append("-" * 30)
        lines.append(f"{component:<18} {value:>11.3f}")
    return "\n".join(lines) + "\n"


def report_text(report: RunReport) -> str:
    dist = ", ".join(f"{k} {v:.3f}" for k, v in report.path_distribution.items())
    return (
        f"policy {report.policy}: n={report.n_samples} accuracy={report.accuracy:.4f} "
        f"mean={report.mean_latency_s:.3f}s p50={report.p50_latency_s:.3f}s p95={report.p95_latency_s:.3f}s\n"
        f"  paths: {dist}\n"
        f"  escalation_rate={report.escalation_rate:.4f} regressions={report.regressions} "
        f"failures={report.failures} privacy_violations={report.privacy_violations} "
        f"tools_dropped={report.tools_dropped}\n"
    )
