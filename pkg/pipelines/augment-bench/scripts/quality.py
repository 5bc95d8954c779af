"""
Stage 4 -- quality.

Scores every text-producing augmentation run (back_translation, paraphrase, caption_concat,
paired) on (original text, augmented text) pairs of its accepted records: mean semantic
similarity, mean ROUGE-L F1 and mean perplexity of the augmented text. Then gates each run
against the optional thresholds of the "quality" config section.

Writes:
  <run>/quality/<method>.json      QualityReport
  <run>/quality/reference.json     perplexity of the original train texts
  <run>/quality/quality_table.txt  one row per method plus the original-text row
  <run>/quality/gate.json          {"passed", "checks": [{"name", "status", "detail"}]}

A failed gate check is reported, not fatal; the train stage can skip failing runs
(train.only_passing).
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from errors import DatasetError                                          # noqa: E402
from augment.records import TEXT_METHODS, AugMethod, read_records        # noqa: E402
from backends.registry import build_backends                             # noqa: E402
from dataset.schema import Split                                         # noqa: E402
from metrics.quality import (                                            # noqa: E402
    QualityReport, corpus_quality, format_quality_table, reference_perplexity,
)
from configuration_loader import common_parser, load_from_args           # noqa: E402
from run_dir import RunDir, run_stage, split_of                          # noqa: E402

SCORED_METHODS = (*TEXT_METHODS, AugMethod.PAIRED)


def text_pairs(records, originals) -> list[tuple[str, str]]:
    texts = {s.sample_id: s.tweet_text for s in originals}
    pairs = []
    for r in records:
        if r.accepted:
            if r.parent_id not in texts:
                raise DatasetError(f"record parent {r.parent_id!r} is not in the ingested manifest")
            pairs.append((texts[r.parent_id], r.new_sample.tweet_text))
    return pairs


def gate_checks(report: QualityReport, qcfg) -> list[dict]:
    """One check per metric; a None threshold gives status SKIP."""
    checks = []
    for metric, value, threshold, ok in (
        ("similarity", report.mean_semantic_similarity, qcfg.min_similarity,
         lambda v, t: v >= t),
        ("rouge_l", report.mean_rouge_l, qcfg.min_rouge_l_f1,
         lambda v, t: v >= t),
        ("perplexity", report.mean_perplexity, qcfg.max_perplexity,
         lambda v, t: v <= t),
    ):
        name = f"{report.method}.{metric}"
        if threshold is None:
            checks.append({"name": name, "status": "SKIP", "detail": None})
        elif ok(value, threshold):
            checks.append({"name": name, "status": "PASS", "detail": None})
        else:
            checks.append({"name": name, "status": "FAIL",
                           "detail": f"{metric}={value:.4f} violates threshold {threshold}"})
    return checks


def quality(cfg, run: RunDir) -> list[QualityReport]:
    originals = run.originals()
    methods = [m for m in run.augment_runs() if AugMethod(m) in SCORED_METHODS]
    if not methods:
        raise DatasetError("no text augmentation records found -- run the augment stage first")

    backends = build_backends(cfg.backends, only=("embedder", "scorer"))
    try:
        if backends.embedder is None or backends.scorer is None:
            raise DatasetError("quality needs backends.embedder and backends.scorer")
        reports = []
        for m in methods:
            records = read_records(run.path("augment", m, "records.jsonl"))
            pairs = text_pairs(records, originals)
            if not pairs:
                raise DatasetError(f"{m}: no accepted augmentations to score")
            try:
                report = corpus_quality(pairs, m, backends.embedder, backends.scorer, workers=cfg.quality.workers)
            except ValueError as e:
                raise DatasetError(f"{m}: {e}") from e
            run.write_json(f"quality/{m}.json", report.to_dict())
            reports.append(report)
        train_texts = [s.tweet_text for s in split_of(originals, Split.TRAIN) if not s.is_augmented]
        reference = reference_perplexity(train_texts, backends.scorer)
    finally:
        backends.close()

    run.write_json("quality/reference.json", {"mean_perplexity": reference, "n": len(train_texts)})
    run.write_text("quality/quality_table.txt", format_quality_table(reports, reference))

    checks = [c for r in reports for c in gate_checks(r, cfg.quality)]
    for c in checks:
        if c["status"] == "FAIL":
            print(f"FAIL -- gate {c['name']}: {c['detail']}")
    run.write_json("quality/gate.json", {
        "passed": all(c["status"] != "FAIL" for c in checks),
        "checks": checks,
    })
    return reports


def failed_methods(run: RunDir) -> set[str]:
    """Methods with at least one FAIL gate check; empty when the quality stage has not run."""
    if not run.path("quality", "gate.json").exists():
        return set()
    gate = run.read_json("quality/gate.json", "quality")
    return {c["name"].split(".")[0] for c in gate["checks"] if c["status"] == "FAIL"}


def main():
    args = common_parser("Score text augmentations and gate them on quality thresholds.").parse_args()

    def body():
        cfg, raw = load_from_args(args)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        quality(cfg, run)
        return run

    run_stage("quality", body)


if __name__ == "__main__":
    main()
