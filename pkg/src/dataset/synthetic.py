"""
Deterministic synthetic multimodal corpora.

Texts draw tokens from a per-class keyword pool with probability ``signal_strength`` and
from a shared noise vocabulary otherwise. Images paint a class-specific shape in a
class-specific hue and interpolate toward uniform noise by (1 - signal_strength).

At signal_strength 1 the class keyword pools are disjoint, so classes are linearly
separable from the text alone. At 0 neither modality carries class information.
"""

import colorsys
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from errors import DatasetError
from dataset.images import ImageTensor, save_image
from dataset.manifest import write_manifest
from dataset.schema import (
    LABEL_ORDER,
    HumanitarianLabel,
    MultimodalSample,
    Split,
    label_index,
)
from dataset.stats import CRISISMMD_COUNTS

_POOL_PREFIX = {
    HumanitarianLabel.AFFECTED_INDIVIDUALS:  "injured",
    HumanitarianLabel.INFRASTRUCTURE_DAMAGE: "collapsed",
    HumanitarianLabel.NOT_HUMANITARIAN:      "random",
    HumanitarianLabel.OTHER_RELEVANT:        "update",
    HumanitarianLabel.RESCUE_VOLUNTEERING:   "donate",
}


@dataclass(frozen=True)
class SynthSpec:
    """
    Fields
    ------
    counts          : split -> label -> number of samples to generate.
    vocab_size      : Size of the shared noise vocabulary.
    pool_size       : Keywords per class pool.
    tokens_per_text : Tokens per generated tweet.
    image_size      : Side length of the square images, pixels.
    signal_strength : 0 (class-independent) .. 1 (separable).
    seed            : Master seed.
    """
    counts:          dict[Split, dict[HumanitarianLabel, int]] = field(default_factory=dict)
    vocab_size:      int = 200
    pool_size:       int = 12
    tokens_per_text: int = 8
    image_size:      int = 32
    signal_strength: float = 1.0
    seed:            int = 0

    def __post_init__(self):
        if not 0.0 <= self.signal_strength <= 1.0:
            raise DatasetError("signal_strength must lie in [0, 1]")
        if self.vocab_size < 1 or self.pool_size < 1 or self.tokens_per_text < 1:
            raise DatasetError("vocab_size, pool_size and tokens_per_text must be positive")
        if self.image_size < 1:
            raise DatasetError("image_size must be positive")
        for per_label in self.counts.values():
            if any(c < 0 for c in per_label.values()):
                raise DatasetError("counts must be non-negative")

    @classmethod
    def crisismmd(cls, **kwargs) -> "SynthSpec":
        return cls(counts={s: dict(per) for s, per in CRISISMMD_COUNTS.items()}, **kwargs)

    @classmethod
    def uniform(cls, per_class: int, splits=(Split.TRAIN,), **kwargs) -> "SynthSpec":
        return cls(counts={s: {lb: per_class for lb in LABEL_ORDER} for s in splits}, **kwargs)


def _rng(spec: SynthSpec, sample_id: str, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, zlib.crc32(sample_id.encode("utf-8")), stream])


def _text(spec: SynthSpec, sample_id: str, label: HumanitarianLabel) -> str:
    rng = _rng(spec, sample_id, 0)
    prefix = _POOL_PREFIX[label]
    tokens = []
    for _ in range(spec.tokens_per_text):
        if rng.random() < spec.signal_strength:
            tokens.append(f"{prefix}{rng.integers(spec.pool_size)}")
        else:
            tokens.append(f"tok{rng.integers(spec.vocab_size)}")
    return " ".join(tokens)


def _shape_mask(label: HumanitarianLabel, n: int) -> np.ndarray:
    yy, xx = np.mgrid[0:n, 0:n] / max(n - 1, 1)
    idx = label_index(label)
    if idx == 0:
        return (np.abs(xx - 0.5) < 0.25) & (np.abs(yy - 0.5) < 0.25)
    if idx == 1:
        return (xx - 0.5) ** 2 + (yy - 0.5) ** 2 < 0.3 ** 2
    if idx == 2:
        return np.abs(yy - 0.5) < 0.15
    if idx == 3:
        return np.abs(xx - 0.5) < 0.15
    return np.abs(xx - yy) < 0.2


def render_image(spec: SynthSpec, sample_id: str, label: HumanitarianLabel) -> ImageTensor:
    """Render the image of one synthetic sample (deterministic in spec.seed and sample_id)."""
    n = spec.image_size
    hue = label_index(label) / len(LABEL_ORDER)
    color = np.array(colorsys.hsv_to_rgb(hue, 0.8, 0.9))
    pattern = np.where(_shape_mask(label, n)[..., None], color, 0.25 * color)
    noise = _rng(spec, sample_id, 1).random((n, n, 3))
    s = spec.signal_strength
    return ImageTensor(np.clip(s * pattern + (1.0 - s) * noise, 0.0, 1.0))


def generate_samples(spec: SynthSpec) -> list[MultimodalSample]:
    """In-memory corpus. image_ref points at images/<sample_id>.png relative to the manifest."""
    samples = []
    for split in Split:
        per_label = spec.counts.get(split, {})
        for label in LABEL_ORDER:
            for k in range(per_label.get(label, 0)):
                sample_id = f"{split.value}-{label_index(label)}-{k:05d}"
                samples.append(MultimodalSample(
                    sample_id=sample_id,
                    tweet_text=_text(spec, sample_id, label),
                    image_ref=f"images/{sample_id}.png",
                    label=label,
                    split=split,
                ))
    return samples


class SyntheticImages:
    """Callable image source for in-memory corpora: sample -> ImageTensor."""

    def __init__(self, spec: SynthSpec):
        self.spec = spec

    def __call__(self, sample: MultimodalSample) -> ImageTensor:
        source_id = sample.parent_id if sample.is_augmented else sample.sample_id
        return render_image(self.spec, source_id, sample.label)


def generate(spec: SynthSpec, out_dir, fmt: str = "tsv", write_images: bool = True) -> Path:
    """Write manifest.<fmt> and (optionally) images/ under out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    samples = generate_samples(spec)
    try:
        manifest = write_manifest(out_dir / f"manifest.{fmt}", samples, fmt)
        if write_images:
            for s in samples:
                save_image(out_dir / s.image_ref, render_image(spec, s.sample_id, s.label))
    except OSError as e:
        raise DatasetError(f"cannot write synthetic corpus to {out_dir}: {e}") from e
    return manifest
