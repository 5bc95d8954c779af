"""End-to-end stage tests on the tiny synthetic corpus.

Stage functions are called in-process; the runner test spawns the real stage scripts.
"""
import importlib.util
import json
from pathlib import Path

import pytest

from errors import DatasetError
from backends.stubs import StubEmbedder
from dataset.schema import Split
from configuration_loader import apply_overrides, parse_configuration
from run_dir import RunDir, sha256
from ingest import ingest
from plan import plan
from augmentation import augment
from quality import quality
import train as train_stage
from train import train_all
from eval import evaluate_all
from report import report
from metrics.classification import EvalReport

ROOT = Path(__file__).parent.parent


def _run_all(raw):
    cfg = parse_configuration(raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    plan(cfg, run)
    augment(cfg, run, "back_translation")
    augment(cfg, run, "real_guidance")
    quality(cfg, run)
    train_all(cfg, run)
    evaluate_all(cfg, run)
    report(cfg, run)
    return cfg, run


def _snapshot(root):
    """Every artifact except timestamps, digests and rendered figures."""
    out = {}
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root)
        if not p.is_file() or p.name in ("metadata.json", "outputs.json"):
            continue
        if p.suffix == ".png" and rel.parts[0] == "report":
            continue
        out[rel.as_posix()] = p.read_bytes()
    return out


@pytest.fixture
def finished(pipeline_raw):
    return _run_all(pipeline_raw)


def test_stages_write_every_artifact(finished):
    cfg, run = finished
    for rel in ("ingest/manifest.tsv", "ingest/distribution.json", "plan/balance_plan.json",
                "augment/back_translation/records.jsonl", "augment/real_guidance/manifest.tsv",
                "quality/gate.json", "quality/quality_table.txt",
                "train/early_fusion-original/final.ckpt", "train/multiview_cross-augmented/best.ckpt",
                "eval/comparison.json", "report/summary.md", "report/01_class_distribution.png",
                "report/02_loss_curves.png"):
        assert run.path(rel).exists(), rel
    outputs = json.loads(run.path("outputs.json").read_text())
    assert outputs["eval/comparison.txt"] == sha256(run.path("eval", "comparison.txt"))


def test_identity_back_translation_doubles_train(finished):
    _, run = finished
    summary = run.read_json("augment/back_translation/summary.json", "augment")
    assert summary["train_before"] == 20
    assert summary["train_after"] == 40
    lines = run.path("augment", "back_translation", "manifest.tsv").read_text().splitlines()
    assert len(lines) == 1 + 40 + 20


def test_quality_of_identity_run(finished):
    _, run = finished
    q = run.read_json("quality/back_translation.json", "quality")
    assert q["mean_semantic_similarity"] == 1.0
    assert q["mean_rouge_l"] == 1.0
    assert abs(q["mean_perplexity"] - 50) < 1e-9
    gate = run.read_json("quality/gate.json", "quality")
    assert gate["passed"] and {c["status"] for c in gate["checks"]} == {"SKIP"}


def test_comparison_cells_equal_eval_reports(finished):
    cfg, run = finished
    comparison = run.read_json("eval/comparison.json", "eval")
    assert comparison["split"] == "test"
    assert comparison["variants"] == ["original", "augmented"]
    for row in comparison["rows"]:
        for variant in ("original", "augmented"):
            report = EvalReport.from_dict({
                k: v for k, v in run.read_json(f"eval/{row['model']}-{variant}.json", "eval").items()
                if k not in ("arch", "variant", "split")
            })
            assert row[variant] == {"accuracy": report.accuracy, "weighted_f1": report.weighted_f1}
            # originals only: the test split has 10 original pairs
            assert report.n == 10


def test_training_logs_every_epoch(finished):
    _, run = finished
    result = run.read_json("train/multiview_cross-augmented/result.json", "train")
    assert result["n_train"] == 20
    rows = [json.loads(line) for line in run.path("train", "multiview_cross-augmented", "epochs.jsonl").open()]
    assert [r["epoch"] for r in rows] == [1, 2]
    assert run.read_json("train/early_fusion-augmented/result.json", "train")["n_train"] == 60


def test_report_names_run_and_sections(finished):
    _, run = finished
    text = run.path("report", "summary.md").read_text()
    assert "back_translation" in text
    assert "early_fusion" in text
    assert "not run" not in text


def test_input_manifest_is_untouched(pipeline_raw, tiny_corpus):
    before = tiny_corpus.read_bytes()
    _run_all(pipeline_raw)
    assert tiny_corpus.read_bytes() == before


def test_rerun_is_byte_identical(pipeline_raw, tmp_path):
    _, run = _run_all(pipeline_raw)
    first = _snapshot(run.root)
    for p in sorted(run.root.rglob("*"), reverse=True):
        p.unlink() if p.is_file() else p.rmdir()
    _run_all(pipeline_raw)
    assert _snapshot(run.root) == first


def test_diffusemix_needs_plan(pipeline_raw):
    cfg = parse_configuration(pipeline_raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    with pytest.raises(DatasetError, match="plan"):
        augment(cfg, run, "diffusemix")


def test_diffusemix_follows_balance_plan(pipeline_raw):
    cfg = parse_configuration(pipeline_raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    balance = plan(cfg, run)
    records = augment(cfg, run, "diffusemix")
    assert len(records) == balance.total == 12
    summary = run.read_json("augment/diffusemix/summary.json", "augment")
    assert summary["train_after"] == 32


def test_train_before_augment_fails_for_augmented_variant(pipeline_raw):
    cfg = parse_configuration(pipeline_raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    with pytest.raises(DatasetError, match="augment"):
        train_all(cfg, run)


def test_diffusemix_replans_when_factor_changes(pipeline_raw, capsys):
    cfg = parse_configuration(pipeline_raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    plan(cfg, run)
    halved = parse_configuration(apply_overrides(pipeline_raw, ["image_aug.factor=0.5"]))
    records = augment(halved, run, "diffusemix")
    assert len(records) == 6
    stored = run.read_json("plan/balance_plan.json", "plan")
    assert (stored["factor"], stored["total"]) == (0.5, 6)
    assert "re-planning with factor 0.5" in capsys.readouterr().out


def test_missing_train_image_stops_training(pipeline_raw):
    cfg = parse_configuration(pipeline_raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    augment(cfg, run, "back_translation")
    victim = next(s for s in run.originals() if s.split is Split.TRAIN)
    (run.image_root() / victim.image_ref).unlink()
    with pytest.raises(DatasetError, match="1 image file"):
        train_all(cfg, run)


def test_plugin_text_embedder_is_closed_after_train_and_eval(pipeline_raw, monkeypatch):
    closed = []

    class ClosingEmbedder(StubEmbedder):
        def close(self):
            closed.append(self.dim)

    monkeypatch.setattr(train_stage, "build_backend", lambda capability, spec: ClosingEmbedder(dim=6))
    raw = apply_overrides(pipeline_raw, ['fusion.text_encoder="plugin"', 'fusion.archs=["text_only"]',
                                         'train.variants=["original"]'])
    cfg = parse_configuration(raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    train_all(cfg, run)
    assert closed == [6]
    evaluate_all(cfg, run)
    assert closed == [6, 6]


def test_only_passing_skips_failed_runs(pipeline_raw, capsys):
    raw = apply_overrides(pipeline_raw, ["quality.max_perplexity=10", "train.only_passing=true",
                                         "fusion.archs=[\"text_only\"]"])
    cfg = parse_configuration(raw)
    run = RunDir(cfg.out_dir)
    ingest(cfg, run)
    augment(cfg, run, "back_translation")
    augment(cfg, run, "real_guidance")
    quality(cfg, run)
    assert not run.read_json("quality/gate.json", "quality")["passed"]
    train_all(cfg, run)
    assert "skipping back_translation" in capsys.readouterr().out
    assert run.read_json("train/text_only-augmented/result.json", "train")["n_train"] == 40


# ------------------------------------------------------------------ runner

def _runner():
    spec = importlib.util.spec_from_file_location("bench_run", ROOT / "pipelines" / "augment-bench" / "run.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_runner_all_completes(pipeline_raw, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(pipeline_raw), encoding="utf-8")
    status, code = _runner().run_pipeline("all", ["--config", str(path)])
    assert code == 0, status
    assert status == {"status": "completed", "stage": "all", "run_dir": pipeline_raw["out_dir"],
                      "error_summary": None}
    meta = json.loads((tmp_path / "run" / "metadata.json").read_text())
    assert meta["stages"]["report"]["status"] == "completed"


def test_runner_reports_failing_stage(pipeline_raw, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(pipeline_raw), encoding="utf-8")
    status, code = _runner().run_pipeline("train-eval", ["--config", str(path)])
    assert code == 2
    assert status["status"] == "failed"
    assert status["stage"] == "train"
    assert "ingest" in status["error_summary"]
