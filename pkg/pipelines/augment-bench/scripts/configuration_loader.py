"""
Configuration loader -- reads the pipeline config JSON and applies command-line overrides.

Functions
---------
load_raw(path) -> dict
apply_overrides(raw, sets) -> dict              sets: ["dotted.key=json-or-string", ...]
parse_configuration(raw) -> PipelineConfig      raises ConfigError naming the dotted path
common_parser(description) -> argparse.ArgumentParser
load_from_args(args, extra_sets=()) -> (PipelineConfig, raw dict)

The global seed drives every stage: augmentation draws, model initialization and
batch shuffling all derive from PipelineConfig.seed.
"""

import argparse
import copy
import json
from dataclasses import dataclass, replace
from pathlib import Path

from errors import ConfigError
from augment.compositing import MaskStyle
from augment.records import IMAGE_METHODS, TEXT_METHODS, AugMethod
from augment.text import BackTranslationChain, ParaphraseFilterPolicy
from backends.registry import CAPABILITIES, BackendsConfig, BackendSpec
from core.fusion import Arch, FusionConfig
from dataset.schema import HumanitarianLabel, Split
from training import TrainConfig

DEFAULT_CONFIG = Path(__file__).resolve().parents[3] / "src" / "config.json"
VARIANTS = ("original", "augmented")


@dataclass
class DatasetConfig:
    manifest:      Path
    format:        str | None
    image_root:    Path | None
    default_split: Split | None


@dataclass
class TextAugConfig:
    methods:           tuple[AugMethod, ...]
    chain:             BackTranslationChain
    policy:            ParaphraseFilterPolicy
    template:          str
    n_candidates:      int
    caption_separator: str
    workers:           int


@dataclass
class ImageAugConfig:
    methods:     tuple[AugMethod, ...]
    targets:     tuple[HumanitarianLabel, ...]
    factor:      float
    prompts:     tuple[str, ...]
    lam:         float
    mask_style:  MaskStyle | None
    rg_strength: float
    rg_template: str
    dm_strength: float
    workers:     int


@dataclass
class PairingConfig:
    text_method:  AugMethod
    image_method: AugMethod


@dataclass
class QualityConfig:
    """Gate thresholds; None disables a check."""
    min_similarity: float | None
    min_rouge_l_f1: float | None
    max_perplexity: float | None
    workers:        int


@dataclass
class TrainingConfig:
    """
    Fields
    ------
    train        : Optimizer and loop settings.
    variants     : Subset of ("original", "augmented").
    methods      : Augmentation runs merged into the augmented variant; None = every run found.
    only_passing : Drop augmentation runs whose quality gate failed.
    """
    train:        TrainConfig
    variants:     tuple[str, ...]
    methods:      tuple[AugMethod, ...] | None
    only_passing: bool


@dataclass
class PipelineConfig:
    seed:      int
    out_dir:   Path
    dataset:   DatasetConfig
    backends:  BackendsConfig
    text_aug:  TextAugConfig
    image_aug: ImageAugConfig
    pairing:   PairingConfig | None
    quality:   QualityConfig
    archs:     tuple[Arch, ...]
    fusion:    FusionConfig
    training:  TrainingConfig

    def fusion_for(self, arch: Arch) -> FusionConfig:
        return replace(self.fusion, arch=Arch(arch))


def _req(obj, *path):
    """Navigate a nested dict by path; raise ConfigError naming the path if any key is missing."""
    cur = obj
    for key in path:
        try:
            cur = cur[key]
        except (KeyError, TypeError, IndexError):
            raise ConfigError(f"config missing: {'.'.join(str(k) for k in path)}") from None
    return cur


def _typed(conv, obj, *path):
    value = _req(obj, *path)
    try:
        return conv(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config {'.'.join(str(k) for k in path)}: {e}") from None


def _opt(conv, obj, key):
    value = obj.get(key) if isinstance(obj, dict) else None
    if value is None:
        return None
    try:
        return conv(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config {key}: {e}") from None


def _methods(raw, path: str, allowed) -> tuple[AugMethod, ...]:
    try:
        methods = tuple(AugMethod(m) for m in raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config {path}: {e}") from None
    bad = [m for m in methods if m not in allowed]
    if bad:
        raise ConfigError(f"config {path}: {bad[0]} is not allowed here")
    return methods


def load_raw(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, sets) -> dict:
    """Return a copy of raw with every "dotted.key=value" applied; intermediate objects are created."""
    out = copy.deepcopy(raw)
    for item in sets:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} must look like dotted.key=value")
        parts = key.split(".")
        cur = out
        for part in parts[:-1]:
            if not isinstance(cur.get(part), dict):
                cur[part] = {}
            cur = cur[part]
        cur[parts[-1]] = _parse_value(value)
    return out


def _load_dataset(raw) -> DatasetConfig:
    split = raw.get("default_split")
    return DatasetConfig(
        manifest=Path(_typed(str, raw, "manifest")),
        format=raw.get("format"),
        image_root=_opt(Path, raw, "image_root"),
        default_split=Split(split) if split else None,
    )


def _load_backends(raw) -> BackendsConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config backends: expected an object")
    unknown = [k for k in raw if k not in CAPABILITIES]
    if unknown:
        raise ConfigError(f"config backends: unknown capability {unknown[0]!r}")
    return BackendsConfig(**{c: BackendSpec.from_dict(c, raw[c]) if raw.get(c) else None for c in CAPABILITIES})


def _load_text_aug(raw) -> TextAugConfig:
    return TextAugConfig(
        methods=_methods(_req(raw, "methods"), "text_aug.methods", TEXT_METHODS),
        chain=BackTranslationChain(tuple(tuple(h) for h in _req(raw, "chain"))),
        policy=ParaphraseFilterPolicy(
            min_similarity=_typed(float, raw, "paraphrase", "min_similarity"),
            max_similarity=_typed(float, raw, "paraphrase", "max_similarity"),
            min_length_ratio=_typed(float, raw, "paraphrase", "min_length_ratio"),
            max_length_ratio=_typed(float, raw, "paraphrase", "max_length_ratio"),
        ),
        template=_typed(str, raw, "paraphrase", "template"),
        n_candidates=_typed(int, raw, "paraphrase", "n_candidates"),
        caption_separator=str(raw.get("caption_separator", " ")),
        workers=int(raw.get("workers", 1)),
    )


def _load_image_aug(raw) -> ImageAugConfig:
    try:
        targets = tuple(HumanitarianLabel(t) for t in _req(raw, "targets"))
        mask_style = MaskStyle(raw["mask_style"]) if raw.get("mask_style") else None
    except ValueError as e:
        raise ConfigError(f"config image_aug: {e}") from None
    return ImageAugConfig(
        methods=_methods(_req(raw, "methods"), "image_aug.methods", IMAGE_METHODS),
        targets=targets,
        factor=_typed(float, raw, "factor"),
        prompts=tuple(str(p) for p in _req(raw, "prompts")),
        lam=_typed(float, raw, "lambda"),
        mask_style=mask_style,
        rg_strength=_typed(float, raw, "rg_strength"),
        rg_template=_typed(str, raw, "rg_template"),
        dm_strength=_typed(float, raw, "dm_strength"),
        workers=int(raw.get("workers", 1)),
    )


def _load_pairing(raw) -> PairingConfig | None:
    if raw is None:
        return None
    return PairingConfig(
        text_method=_methods([_req(raw, "text_method")], "pairing.text_method", TEXT_METHODS)[0],
        image_method=_methods([_req(raw, "image_method")], "pairing.image_method", IMAGE_METHODS)[0],
    )


def _load_quality(raw) -> QualityConfig:
    return QualityConfig(
        min_similarity=_opt(float, raw, "min_similarity"),
        min_rouge_l_f1=_opt(float, raw, "min_rouge_l_f1"),
        max_perplexity=_opt(float, raw, "max_perplexity"),
        workers=int(raw.get("workers", 1)),
    )


def _load_fusion(raw, seed: int, image_size: int) -> tuple[tuple[Arch, ...], FusionConfig]:
    try:
        archs = tuple(Arch(a) for a in _req(raw, "archs"))
    except ValueError as e:
        raise ConfigError(f"config fusion.archs: {e}") from None
    if not archs:
        raise ConfigError("config fusion.archs: at least one architecture")
    fusion = FusionConfig(
        arch=archs[0],
        d=_typed(int, raw, "d"),
        heads=_typed(int, raw, "heads"),
        seed=seed,
        hidden=_opt(int, raw, "hidden"),
        n_buckets=int(raw.get("n_buckets", 1024)),
        image_size=image_size,
        patch_size=_typed(int, raw, "patch_size"),
        self_layers=int(raw.get("self_layers", 1)),
        caption_encoder=str(raw.get("caption_encoder", "shared")),
        text_encoder=str(raw.get("text_encoder", "toy")),
    )
    return archs, fusion


def _load_training(raw, seed: int) -> TrainingConfig:
    variants = tuple(str(v) for v in raw.get("variants", VARIANTS))
    bad = [v for v in variants if v not in VARIANTS]
    if bad or not variants:
        raise ConfigError(f"config train.variants: expected a subset of {VARIANTS}, got {list(variants)}")
    methods = raw.get("methods")
    return TrainingConfig(
        train=TrainConfig(
            epochs=_typed(int, raw, "epochs"),
            learning_rate=_typed(float, raw, "learning_rate"),
            weight_decay=_typed(float, raw, "weight_decay"),
            batch_size=_typed(int, raw, "batch_size"),
            seed=seed,
            image_size=_typed(int, raw, "image_size"),
        ),
        variants=variants,
        methods=None if methods is None else _methods(methods, "train.methods", tuple(AugMethod)),
        only_passing=bool(raw.get("only_passing", False)),
    )


def _section(raw, name: str, load, *args):
    """Run a section loader; relative key paths in its errors get the section name prepended."""
    section = raw.get(name) if name == "pairing" else _req(raw, name)
    try:
        return load(section, *args)
    except ConfigError as e:
        text = str(e)
        for head in ("config missing: ", "config "):
            if text.startswith(head):
                if not text.startswith(head + name):
                    raise ConfigError(f"{head}{name}.{text[len(head):]}") from None
                break
        raise


def parse_configuration(raw: dict) -> PipelineConfig:
    seed = _typed(int, raw, "seed")
    training = _section(raw, "train", _load_training, seed)
    archs, fusion = _section(raw, "fusion", _load_fusion, seed, training.train.image_size)
    return PipelineConfig(
        seed=seed,
        out_dir=Path(_typed(str, raw, "out_dir")),
        dataset=_section(raw, "dataset", _load_dataset),
        backends=_section(raw, "backends", _load_backends),
        text_aug=_section(raw, "text_aug", _load_text_aug),
        image_aug=_section(raw, "image_aug", _load_image_aug),
        pairing=_section(raw, "pairing", _load_pairing),
        quality=_section(raw, "quality", _load_quality),
        archs=archs,
        fusion=fusion,
        training=training,
    )


def check_paths(cfg: PipelineConfig):
    """Referenced input paths must exist before a stage reads them."""
    if not cfg.dataset.manifest.exists():
        raise ConfigError(f"dataset.manifest not found: {cfg.dataset.manifest}")
    if cfg.dataset.image_root is not None and not cfg.dataset.image_root.is_dir():
        raise ConfigError(f"dataset.image_root is not a directory: {cfg.dataset.image_root}")


def common_parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", default=str(DEFAULT_CONFIG), help="pipeline config JSON")
    p.add_argument("--out", help="run directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="global seed (overrides seed)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config value, e.g. --set train.epochs=3")
    return p


def load_from_args(args, extra_sets=()) -> tuple[PipelineConfig, dict]:
    sets = list(args.set)
    if args.out:
        sets.append(f"out_dir={json.dumps(args.out)}")
    if args.seed is not None:
        sets.append(f"seed={args.seed}")
    raw = apply_overrides(load_raw(args.config), [*sets, *extra_sets])
    return parse_configuration(raw), raw
