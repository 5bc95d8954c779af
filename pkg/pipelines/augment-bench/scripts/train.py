"""
Stage 5 -- train.

Trains every configured architecture on the original train split and, for the
"augmented" variant, on the train split enlarged by the augmentation runs found in the
run directory. Early-fusion and unimodal models see augmented samples as extra training
rows; multi-view models get one bundle per original with the augmented and caption views
filled in. Dev metrics are computed on original pairs only.

Writes, per <arch>-<variant>:
  <run>/train/<arch>-<variant>/epochs.jsonl   per-epoch loss, train accuracy, dev accuracy / F1
  <run>/train/<arch>-<variant>/final.ckpt     parameters after the last epoch
  <run>/train/<arch>-<variant>/best.ckpt      parameters of the best dev weighted-F1 epoch
  <run>/train/<arch>-<variant>/result.json    best epoch, best dev F1, sizes
"""

import json
import sys
from contextlib import closing
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from errors import ConfigError, DatasetError                          # noqa: E402
from augment.records import accepted_samples, read_records            # noqa: E402
from backends.registry import build_backend                           # noqa: E402
from core.fusion import Arch, FusionModel, ViewBundle, build_view_bundles  # noqa: E402
from dataset.manifest import check_images_exist                       # noqa: E402
from dataset.schema import Split                                      # noqa: E402
from telemetry.checkpoint import write_checkpoint                     # noqa: E402
from telemetry.recorder import EpochRecorder, JsonlSink               # noqa: E402
from training import train                                            # noqa: E402
from configuration_loader import common_parser, load_from_args        # noqa: E402
from quality import failed_methods                                    # noqa: E402
from run_dir import RunDir, run_stage, split_of                       # noqa: E402


def run_name(arch: Arch, variant: str) -> str:
    return f"{Arch(arch).value}-{variant}"


def selected_runs(cfg, run: RunDir) -> list[str]:
    found = run.augment_runs()
    wanted = [m.value for m in cfg.training.methods] if cfg.training.methods is not None else found
    missing = [m for m in wanted if m not in found]
    if missing:
        raise DatasetError(f"train.methods names {missing[0]} but the run has no such augment output")
    if cfg.training.only_passing:
        failed = failed_methods(run)
        for m in wanted:
            if m in failed:
                print(f"WARN -- skipping {m}: quality gate failed")
        wanted = [m for m in wanted if m not in failed]
    if not wanted:
        raise DatasetError("augmented variant needs at least one augment run")
    return wanted


def _pair_bundle(sample, images) -> ViewBundle:
    return ViewBundle.from_pair(sample.tweet_text, images(sample), sample.label, sample.sample_id)


def build_bundles(cfg, run: RunDir, arch: Arch, variant: str, originals):
    """(train bundles, dev bundles) for one architecture and variant."""
    train_originals = [s for s in split_of(originals, Split.TRAIN) if not s.is_augmented]
    if not train_originals:
        raise DatasetError("the ingested manifest has no original train samples")
    records = []
    if variant == "augmented":
        for m in selected_runs(cfg, run):
            records += read_records(run.path("augment", m, "records.jsonl"))
    children = accepted_samples(records)
    dev = [s for s in split_of(originals, Split.DEV) if not s.is_augmented]
    check_images_exist([*train_originals, *children, *dev], run.image_root())
    images = run.image_store()

    if Arch(arch).multiview:
        train_bundles = build_view_bundles(train_originals, records, images)
    else:
        train_bundles = [_pair_bundle(s, images) for s in train_originals + children]
    return train_bundles, [_pair_bundle(s, images) for s in dev]


def make_model(cfg, arch: Arch) -> FusionModel:
    fusion = cfg.fusion_for(arch)
    embedder = None
    if fusion.text_encoder == "plugin":
        embedder = build_backend("embedder", cfg.backends.embedder)
        if embedder is None:
            raise ConfigError("fusion.text_encoder 'plugin' needs backends.embedder")
    return FusionModel(fusion, text_backend=embedder)


def train_one(cfg, run: RunDir, arch: Arch, variant: str, originals):
    name = run_name(arch, variant)
    train_bundles, dev_bundles = build_bundles(cfg, run, arch, variant, originals)
    base = run.path("train", name)
    with closing(make_model(cfg, arch)) as model, JsonlSink(base / "epochs.jsonl") as sink:
        result = train(model, train_bundles, dev_bundles, cfg.training.train, EpochRecorder(sink))
    run.register(base / "epochs.jsonl")

    config = model.config.to_dict()
    run.register(write_checkpoint(base / "final.ckpt", model.params, config, cfg.seed, cfg.training.train.epochs))
    run.register(write_checkpoint(base / "best.ckpt", result.best_params, config, cfg.seed, result.best_epoch))
    run.write_json(f"train/{name}/result.json", {
        "arch":         Arch(arch).value,
        "variant":      variant,
        "n_train":      len(train_bundles),
        "n_dev":        len(dev_bundles),
        "n_parameters": model.n_parameters,
        "best_epoch":   result.best_epoch,
        "best_dev_f1":  result.best_dev_f1,
        "final_loss":   result.losses[-1],
        "train":        cfg.training.train.to_dict(),
    })
    return result


def train_all(cfg, run: RunDir) -> dict:
    originals = run.originals()
    return {run_name(a, v): train_one(cfg, run, a, v, originals)
            for a in cfg.archs for v in cfg.training.variants}


def main():
    parser = common_parser("Train every configured architecture on original and augmented data.")
    parser.add_argument("--arch", action="append", default=[], help="restrict to this architecture (repeatable)")
    parser.add_argument("--epochs", type=int)
    args = parser.parse_args()
    extra = []
    if args.arch:
        extra.append(f"fusion.archs={json.dumps(args.arch)}")
    if args.epochs is not None:
        extra.append(f"train.epochs={args.epochs}")

    def body():
        cfg, raw = load_from_args(args, extra)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        train_all(cfg, run)
        return run

    run_stage("train", body)


if __name__ == "__main__":
    main()
