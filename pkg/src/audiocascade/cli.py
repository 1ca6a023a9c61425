"""Command-line entry point: run, replay, segment, report, mock-cloud."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from audiocascade.backends.scripted import FixtureError, ScriptedFixture
from audiocascade.bench import report as rep
from audiocascade.bench.dataset import DatasetError, load_dataset, read_wav, synthesize
from audiocascade.bench.runner import (
    ConfigError,
    RunConfig,
    load_config,
    read_traces,
    run_experiment,
    write_summary,
)
from audiocascade.orchestrator import get_policy
from audiocascade.segmenter import SegmenterConfig, propose

log = logging.getLogger("audiocascade")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3


def _fail(kind: str, message: str, code: int = EXIT_INPUT) -> int:
    print(json.dumps({"error": message, "kind": kind}), file=sys.stderr)
    return code


def _require_file(path, what: str):
    if path is not None and not Path(path).exists():
        raise ConfigError(f"{what} not found: {path}")


def cmd_run(args) -> int:
    config = load_config(args.config) if args.config else RunConfig()
    if args.dataset:
        config.dataset = Path(args.dataset)
    if args.fixture:
        config.fixture = Path(args.fixture)
    if args.policy:
        for name in args.policy:
            try:
                get_policy(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        config.policies = tuple(args.policy)
    if args.workers:
        config.workers = args.workers
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.mode:
        config.mode = args.mode
        config.pipeline = replace(config.pipeline, mode=args.mode)
    if args.cloud_url:
        config.backends = {**config.backends, "cloud": "remote", "cloud_url": args.cloud_url}
    if config.dataset is None:
        raise ConfigError("no dataset: pass --dataset or set it in the config")
    _require_file(config.dataset, "dataset")
    if config.mode == "sim" and config.fixture is None:
        raise ConfigError("simulation mode needs a fixture: pass --fixture or set it in the config")
    _require_file(config.fixture, "fixture")

    results = run_experiment(config, args.out)
    reports = [r.report for r in results]
    if args.out:
        print((Path(args.out) / "summary.txt").read_text(), end="")
    else:
        print("".join(rep.report_text(r) for r in reports), end="")
        if len(reports) >= 2:
            print(rep.tradeoff_text(rep.compare_policies(reports)), end="")
    return EXIT_OK


def cmd_replay(args) -> int:
    records = load_dataset(args.dataset)
    gold = {r.sample_id: r.gold_answer for r in records}
    reports = []
    for path in args.trace:
        policy = Path(path).name.split(".")[0]
        reports.append(rep.score(read_traces(path), gold, policy))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for r in reports:
            (out / f"{r.policy}.report.json").write_text(json.dumps(r.to_dict(), indent=2, sort_keys=True) + "\n")
        write_summary(out, reports)
    print("".join(rep.report_text(r) for r in reports), end="")
    if len(reports) >= 2:
        print(rep.tradeoff_text(rep.compare_policies(reports)), end="")
    return EXIT_OK


def cmd_segment(args) -> int:
    seg_config = load_config(args.config).pipeline.segmenter if args.config else SegmenterConfig()
    if args.synth:
        clip = synthesize(args.synth, args.sample_rate, "synth")
    elif args.audio:
        clip = read_wav(args.audio)
    else:
        raise ConfigError("give an audio path or --synth SPEC")
    proposal = propose(clip, seg_config)
    if args.json:
        print(json.dumps({
            "clip_id": proposal.clip_id, "clip_duration": proposal.clip_duration,
            "windows": [{"index": w.index, "start_s": w.start_s, "end_s": w.end_s, "source": w.source,
                         "energy_score": w.energy_score} for w in proposal.windows],
        }, indent=2))
        return EXIT_OK
    print(f"clip {proposal.clip_id}: {proposal.clip_duration:.3f}s, {len(proposal)} windows")
    print(f"{'index':>5}  {'start_s':>8}  {'end_s':>8}  {'source':<12}  energy")
    for w in proposal.windows:
        energy = "" if w.energy_score is None else f"{w.energy_score:.4f}"
        print(f"{w.index:>5}  {w.start_s:>8.3f}  {w.end_s:>8.3f}  {w.source:<12}  {energy}")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [rep.RunReport.from_dict(json.loads(Path(p).read_text())) for p in args.reports]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        text = write_summary(out, reports)
    else:
        text = ""
        if len(reports) >= 2:
            text += rep.tradeoff_text(rep.compare_policies(reports)) + "\n"
        text += "\n".join(rep.breakdown_text(r.policy, r.breakdown) for r in reports)
    print(text, end="")
    return EXIT_OK


def cmd_mock_cloud(args) -> int:
    from audiocascade.mockcloud import serve

    fixture = ScriptedFixture.load(args.fixture)
    try:
        server = serve(fixture, args.host, args.port, args.capture)
    except OSError as exc:
        return _fail("startup", f"cannot bind {args.host}:{args.port}: {exc}")
    print(f"mock cloud listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="audiocascade", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run policies over a dataset")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--fixture")
    p.add_argument("--policy", action="append", help="repeatable; default: all policies in the config")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--mode", choices=("sim", "live"))
    p.add_argument("--cloud-url", help="use a remote cloud controller at this URL")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="rescore trace logs")
    p.add_argument("--trace", action="append", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("segment", help="print the ROI proposal for one clip")
    p.add_argument("audio", nargs="?", help="mono PCM WAV file")
    p.add_argument("--synth", help="synthetic spec, e.g. '10s silence + 1s burst @2s'")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--config")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("report", help="compare saved run reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("mock-cloud", help="serve the cloud wire protocol from a fixture")
    p.add_argument("--fixture", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--capture", help="append every received request to this file")
    p.set_defaults(func=cmd_mock_cloud)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc))
    except (DatasetError, FixtureError) as exc:
        return _fail("input", str(exc))
    except rep.ScoringError as exc:
        return _fail("scoring", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
