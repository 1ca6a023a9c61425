from audiocascade.bench.dataset import load_dataset
from audiocascade.bench.reference import GROUP_SIZES, N, build_reference
from audiocascade.bench.runner import load_config
from audiocascade.gate import escalation_rate, evaluate


def test_generator_reproduces_shipped_files(tmp_path, reference_dir):
    paths = build_reference(tmp_path)
    for name, path in paths.items():
        assert path.read_bytes() == (reference_dir / path.name).read_bytes(), name


def test_shipped_fixture_is_complete(reference_dir, reference_fixture):
    records = load_dataset(reference_dir / "dataset.jsonl")
    assert len(records) == N == sum(GROUP_SIZES.values())
    reference_fixture.check_complete(r.sample_id for r in records)


def test_local_gate_agrees_with_scripted_gate(reference_dir, reference_fixture):
    records = load_dataset(reference_dir / "dataset.jsonl")
    decisions = []
    for r in records:
        s0 = reference_fixture.lookup(r.sample_id, "stage0")
        d = evaluate(s0["rationale"], r.query, s0["answer"])
        assert d.escalate == reference_fixture.lookup(r.sample_id, "gate")["escalate"], r.sample_id
        decisions.append(d)
    assert f"{escalation_rate(decisions):.4f}" == "0.6180"


def test_reference_config_loads(reference_dir):
    cfg = load_config(reference_dir / "config.yaml")
    assert cfg.pipeline.network.mode == "scripted"
    assert cfg.dataset.exists() and cfg.fixture.exists()
