"""
Stage 3 -- augment (scripts/augmentation.py).

Runs one augmentation method over the train split of the ingested manifest and writes an
augmented manifest (every ingested row plus the accepted augmented rows) next to the
per-sample records. The ingested manifest is never modified.

  --modality text    back_translation | paraphrase | caption_concat
  --modality image   real_guidance | diffusemix (diffusemix needs the plan stage and re-plans
                     when image_aug.factor or targets differ from the stored plan)
  --modality paired  joins the accepted children of pairing.text_method and
                     pairing.image_method runs (both must exist)

Without --method every method configured for the modality runs in turn.

Writes, per method:
  <run>/augment/<method>/records.jsonl
  <run>/augment/<method>/manifest.tsv
  <run>/augment/<method>/summary.json    verdict counts, train rows before/after
  <run>/augment/<method>/images/*.png    image methods only

Augmented ids continue after children already present in the run, so the manifests of
several methods can be merged for training without id clashes.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from errors import ConfigError                                       # noqa: E402
from augment.image import augment_image_corpus                       # noqa: E402
from augment.pairing import pair_augmentations                       # noqa: E402
from augment.records import (                                        # noqa: E402
    IMAGE_METHODS, TEXT_METHODS, AugMethod, accepted_samples, read_records, verdict_counts, write_records,
)
from augment.text import augment_text_corpus                         # noqa: E402
from backends.registry import BackendsConfig, build_backends         # noqa: E402
from dataset.manifest import write_manifest                          # noqa: E402
from dataset.schema import Split                                     # noqa: E402
from configuration_loader import common_parser, load_from_args       # noqa: E402
from plan import current_plan                                        # noqa: E402
from run_dir import RunDir, run_stage, split_of                      # noqa: E402

MODALITIES = ("text", "image", "paired")

_NEEDED = {
    AugMethod.BACK_TRANSLATION: ("translator",),
    AugMethod.PARAPHRASE:       ("paraphraser", "embedder"),
    AugMethod.CAPTION_CONCAT:   ("captioner",),
    AugMethod.REAL_GUIDANCE:    ("imagegen",),
    AugMethod.DIFFUSEMIX:       ("imagegen",),
}


def _other_children(run: RunDir, method: AugMethod) -> list[str]:
    ids = []
    for name in run.augment_runs():
        if name != method.value:
            ids += [s.sample_id for s in accepted_samples(read_records(run.path("augment", name, "records.jsonl")))]
    return ids


def _records(cfg, run: RunDir, method: AugMethod, originals, existing_ids) -> list:
    train = split_of(originals, Split.TRAIN)
    if method is AugMethod.PAIRED:
        if cfg.pairing is None:
            raise ConfigError("paired augmentation needs a 'pairing' config section")
        text = read_records(run.path("augment", cfg.pairing.text_method.value, "records.jsonl"))
        image = read_records(run.path("augment", cfg.pairing.image_method.value, "records.jsonl"))
        return pair_augmentations(text, image, existing_ids)

    backends = build_backends(cfg.backends, only=_NEEDED[method])
    try:
        missing = [c for c in _NEEDED[method] if getattr(backends, c) is None]
        if missing:
            raise ConfigError(f"{method} needs backends.{missing[0]}")
        images = run.image_store()
        if method in TEXT_METHODS:
            t = cfg.text_aug
            return augment_text_corpus(
                train, method, backends, t.policy, cfg.seed,
                chain=t.chain, n_candidates=t.n_candidates, template=t.template,
                separator=t.caption_separator, image_source=images,
                existing_ids=existing_ids, workers=t.workers,
            )
        img = cfg.image_aug
        return augment_image_corpus(
            train, method, backends.imagegen, images, cfg.seed,
            plan=current_plan(cfg, run) if method is AugMethod.DIFFUSEMIX else None,
            prompts=img.prompts, lam=img.lam, mask_style=img.mask_style,
            strength=img.rg_strength if method is AugMethod.REAL_GUIDANCE else img.dm_strength,
            prompt_template=img.rg_template,
            image_dir=run.path("augment", method.value, "images"),
            image_root=run.image_root(),
            existing_ids=existing_ids, workers=img.workers,
        )
    finally:
        backends.close()


def augment(cfg, run: RunDir, method: AugMethod | str) -> list:
    """Run one method; returns its records."""
    method = AugMethod(method)
    originals = run.originals()
    existing = [s.sample_id for s in originals] + _other_children(run, method)
    records = _records(cfg, run, method, originals, existing)

    base = f"augment/{method.value}"
    run.register(write_records(run.path(base, "records.jsonl"), records))
    new = accepted_samples(records)
    run.register(write_manifest(run.path(base, "manifest.tsv"), [*originals, *new], "tsv"))
    if method in IMAGE_METHODS and new:
        run.register_all(sorted(run.path(base, "images").glob("*.png")))

    counts = verdict_counts(records)
    train_before = len(split_of(originals, Split.TRAIN))
    run.write_json(f"{base}/summary.json", {
        "method":       method.value,
        "verdicts":     counts,
        "train_before": train_before,
        "train_after":  train_before + len(new),
    })
    if counts["failed"]:
        print(f"WARN -- {method}: {counts['failed']} sample(s) failed; see records.jsonl")
    return records


def methods_for(cfg, modality: str, method: str | None) -> list[AugMethod]:
    if method:
        m = AugMethod(method)
        allowed = {"text": TEXT_METHODS, "image": IMAGE_METHODS, "paired": (AugMethod.PAIRED,)}[modality]
        if m not in allowed:
            raise ConfigError(f"{m} is not a {modality} method")
        return [m]
    if modality == "text":
        return list(cfg.text_aug.methods)
    if modality == "image":
        return list(cfg.image_aug.methods)
    return [AugMethod.PAIRED]


def _backend_override(capability: str, value: str) -> str:
    spec = getattr(BackendsConfig().with_override(capability, value), capability)
    return f"backends.{capability}={json.dumps(spec.to_dict())}"


def main():
    parser = common_parser("Augment the train split with one or more methods.")
    parser.add_argument("--modality", choices=MODALITIES, default="text")
    parser.add_argument("--method", help="single method to run (default: all configured for the modality)")
    parser.add_argument("--min-similarity", type=float)
    parser.add_argument("--max-similarity", type=float)
    parser.add_argument("--lambda", dest="lam", type=float)
    parser.add_argument("--mask-style")
    parser.add_argument("--factor", type=float)
    for cap in ("translator", "paraphraser", "imagegen"):
        parser.add_argument(f"--{cap}", metavar="stub:MODE|plugin:CMD_OR_URL")
    args = parser.parse_args()

    extra = []
    for flag, key in (("min_similarity", "text_aug.paraphrase.min_similarity"),
                      ("max_similarity", "text_aug.paraphrase.max_similarity"),
                      ("lam", "image_aug.lambda"),
                      ("factor", "image_aug.factor")):
        if getattr(args, flag) is not None:
            extra.append(f"{key}={getattr(args, flag)}")
    if args.mask_style:
        extra.append(f"image_aug.mask_style={json.dumps(args.mask_style)}")

    def body():
        sets = list(extra)
        for cap in ("translator", "paraphraser", "imagegen"):
            if getattr(args, cap):
                sets.append(_backend_override(cap, getattr(args, cap)))
        cfg, raw = load_from_args(args, sets)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        for m in methods_for(cfg, args.modality, args.method):
            augment(cfg, run, m)
        return run

    run_stage(f"augment:{args.modality}", body)


if __name__ == "__main__":
    main()
