"""
Stage 6 -- eval.

Evaluates the final checkpoint of every trained <arch>-<variant> on the test split (the dev
split when the manifest has no test rows). Inference feeds original text-image pairs only;
multi-view models see every auxiliary view as an absent placeholder.

Writes:
  <run>/eval/<arch>-<variant>.json   EvalReport plus arch, variant, split
  <run>/eval/<arch>-<variant>.txt    per-class table
  <run>/eval/comparison.json         original vs augmented, accuracy and weighted F1 per arch
  <run>/eval/comparison.txt          same, best per column marked *
"""

import sys
from contextlib import closing
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from errors import DatasetError                                        # noqa: E402
from core.fusion import FusionConfig, FusionModel, ViewBundle          # noqa: E402
from dataset.manifest import check_images_exist                        # noqa: E402
from dataset.schema import Split                                       # noqa: E402
from metrics.classification import EvalReport, format_eval_report      # noqa: E402
from telemetry.checkpoint import read_checkpoint                       # noqa: E402
from training import ComparisonTable, comparison_report, evaluate      # noqa: E402
from configuration_loader import common_parser, load_from_args         # noqa: E402
from train import make_model, run_name                                 # noqa: E402
from run_dir import RunDir, run_stage, split_of                        # noqa: E402


def load_model(cfg, path) -> FusionModel:
    header, params = read_checkpoint(path)
    fusion = FusionConfig.from_dict(header["config"])
    model = make_model(cfg, fusion.arch) if fusion.text_encoder == "plugin" else FusionModel(fusion)
    model.load_params(params)
    return model


def eval_split(originals) -> tuple[Split, list]:
    for split in (Split.TEST, Split.DEV):
        samples = [s for s in split_of(originals, split) if not s.is_augmented]
        if samples:
            return split, samples
    raise DatasetError("no test or dev samples to evaluate on")


def evaluate_all(cfg, run: RunDir) -> tuple[dict, ComparisonTable]:
    originals = run.originals()
    split, samples = eval_split(originals)
    check_images_exist(samples, run.image_root())
    images = run.image_store()
    bundles = [ViewBundle.from_pair(s.tweet_text, images(s), s.label, s.sample_id) for s in samples]

    runs: dict[str, dict[str, EvalReport]] = {}
    for arch in cfg.archs:
        for variant in cfg.training.variants:
            name = run_name(arch, variant)
            ckpt = run.path("train", name, "final.ckpt")
            if not ckpt.exists():
                raise DatasetError(f"{ckpt} not found -- run the train stage first")
            with closing(load_model(cfg, ckpt)) as model:
                report = evaluate(model, bundles)
            run.write_json(f"eval/{name}.json", {
                "arch": arch.value, "variant": variant, "split": split.value, **report.to_dict(),
            })
            run.write_text(f"eval/{name}.txt", format_eval_report(report, f"{name} on {split.value}"))
            runs.setdefault(arch.value, {})[variant] = report

    table = comparison_report(runs)
    run.write_json("eval/comparison.json", {"split": split.value, **table.to_dict()})
    run.write_text("eval/comparison.txt", table.text())
    return runs, table


def main():
    args = common_parser("Evaluate trained models on original text-image pairs.").parse_args()

    def body():
        cfg, raw = load_from_args(args)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        evaluate_all(cfg, run)
        return run

    run_stage("eval", body)


if __name__ == "__main__":
    main()
