"""
Image augmentation: Real Guidance, DiffuseMix and class-targeted balancing.

Real Guidance asks the image generator for a near-duplicate of every train image
(whole-set mode doubles the train split). DiffuseMix composes three steps:

    generated = gen(image, prompt)
    hybrid    = masked_blend(image, generated, mask_style)
    output    = fractal_blend(hybrid, generate_fractal(fractal_seed), lambda)

and is applied only to the minority classes, as many times as a BalancePlan asks for.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from errors import BackendError, ConfigError, DatasetError
from dataset.images import ImageTensor, save_image
from dataset.schema import (
    LABEL_ORDER,
    MINORITY_LABELS,
    ClassDistribution,
    HumanitarianLabel,
    MultimodalSample,
    Provenance,
    Split,
    label_phrase,
)
from augment.compositing import (
    HALF_STYLES,
    BlendMask,
    MaskStyle,
    fractal_blend,
    generate_fractal,
    masked_blend,
)
from augment.records import AugMethod, AugmentationRecord, ChildCounter, Verdict, sample_seed

DEFAULT_STYLE_PROMPTS = ("autumn", "watercolor art", "sunset", "mosaic")
DEFAULT_LAMBDA = 0.2
DEFAULT_RG_STRENGTH = 0.5
DEFAULT_RG_TEMPLATE = "a photo of {label}"
DEFAULT_DM_STRENGTH = 0.75


@dataclass(frozen=True)
class DiffuseMixParams:
    """
    Fields
    ------
    prompt       : Style prompt handed to the generator.
    lam          : Fractal blend coefficient; 1 keeps the hybrid, 0 the fractal.
    mask_style   : Which half of the original survives the masked blend.
    fractal_seed : Seed of the procedural fractal.
    strength     : Generator strength in [0, 1].
    gen_seed     : Seed of the generator call.
    """
    prompt:       str
    lam:          float = DEFAULT_LAMBDA
    mask_style:   MaskStyle = MaskStyle.LEFT_HALF
    fractal_seed: int = 0
    strength:     float = DEFAULT_DM_STRENGTH
    gen_seed:     int = 0

    def __post_init__(self):
        object.__setattr__(self, "mask_style", MaskStyle(self.mask_style))
        if not self.prompt:
            raise ConfigError("DiffuseMix prompt must be non-empty")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.strength <= 1.0:
            raise ConfigError(f"strength must lie in [0, 1], got {self.strength}")

    def to_dict(self) -> dict:
        return {
            "prompt":       self.prompt,
            "lambda":       self.lam,
            "mask_style":   self.mask_style.value,
            "fractal_seed": self.fractal_seed,
            "strength":     self.strength,
            "gen_seed":     self.gen_seed,
        }


@dataclass(frozen=True)
class BalancePlan:
    """Per-label number of DiffuseMix augmentations; untargeted labels are 0."""
    counts: dict[HumanitarianLabel, int] = field(default_factory=dict)

    def __post_init__(self):
        full = {lb: int(self.counts.get(lb, 0)) for lb in LABEL_ORDER}
        if any(c < 0 for c in full.values()):
            raise ConfigError("planned counts must be non-negative")
        stray = [lb for lb, c in full.items() if c > 0 and lb not in MINORITY_LABELS]
        if stray:
            raise ConfigError(f"plan targets non-minority label {stray[0]}")
        object.__setattr__(self, "counts", full)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def targeted(self) -> dict[HumanitarianLabel, int]:
        return {lb: c for lb, c in self.counts.items() if c > 0}

    def to_dict(self) -> dict:
        return {lb.value: c for lb, c in self.counts.items()}


def plan_balance(dist: ClassDistribution, targets, factor: float) -> BalancePlan:
    """Plan floor(factor x train count) additions for each targeted minority label.

    targets is a single label (single-class mode) or an iterable of labels (multi-class mode).
    """
    if isinstance(targets, str):
        targets = [targets]
    targets = [HumanitarianLabel(t) for t in targets]
    bad = [t for t in targets if t not in MINORITY_LABELS]
    if bad:
        raise ConfigError(f"cannot target {bad[0]}: only "
                          f"{', '.join(sorted(lb.value for lb in MINORITY_LABELS))} are augmented")
    if not (factor >= 0.0 and math.isfinite(factor)):
        raise ConfigError(f"factor must be a finite number >= 0, got {factor}")
    # Fraction of the shortest repr keeps floor(2.3 x 100) at 230.
    exact = Fraction(repr(float(factor)))
    return BalancePlan({t: math.floor(exact * dist.count(Split.TRAIN, t)) for t in targets})


def augmented_image_ref(sample_id: str, method: AugMethod, image_dir: Path | None, image_root: Path | None) -> str:
    name = sample_id.replace("#", "_") + ".png"
    if image_dir is None:
        return f"augmented/{method.value}/{name}"
    path = Path(image_dir) / name
    if image_root is None:
        return path.as_posix()
    return Path(os.path.relpath(path, image_root)).as_posix()


def _augmented_sample(parent: MultimodalSample, new_id: str, image_ref: str) -> MultimodalSample:
    return MultimodalSample(
        sample_id=new_id,
        tweet_text=parent.tweet_text,
        image_ref=image_ref,
        label=parent.label,
        split=parent.split,
        provenance=Provenance.AUGMENTED,
        parent_id=parent.sample_id,
    )


def _generate(gen, image: ImageTensor, prompt: str, strength: float, seed: int) -> ImageTensor:
    out = gen.generate(image, prompt, strength, seed)
    if not isinstance(out, ImageTensor) or not out.same_size(image):
        raise BackendError(f"image generator broke the size invariant for prompt {prompt!r}")
    return out


def diffusemix_image(image: ImageTensor, params: DiffuseMixParams, gen) -> ImageTensor:
    generated = _generate(gen, image, params.prompt, params.strength, params.gen_seed)
    hybrid = masked_blend(image, generated, BlendMask.make(params.mask_style, image.height, image.width))
    fractal = generate_fractal(params.fractal_seed, image.height, image.width)
    return fractal_blend(hybrid, fractal, params.lam)


def diffusemix_augment(sample: MultimodalSample, params: DiffuseMixParams, gen, image_source,
                       new_id: str | None = None, image_ref: str | None = None) -> AugmentationRecord:
    """Run the DiffuseMix pipeline on one sample. Raises on backend failure or unreadable image."""
    new_id = new_id or f"{sample.sample_id}#aug1"
    image_ref = image_ref or augmented_image_ref(new_id, AugMethod.DIFFUSEMIX, None, None)
    out = diffusemix_image(image_source(sample), params, gen)
    return AugmentationRecord(
        parent_id=sample.sample_id,
        method=AugMethod.DIFFUSEMIX,
        params={**params.to_dict(), "image_ref": image_ref},
        verdict=Verdict.accepted(),
        new_sample=_augmented_sample(sample, new_id, image_ref),
        image=out,
    )


def real_guidance_prompt(label: HumanitarianLabel, template: str = DEFAULT_RG_TEMPLATE) -> str:
    return template.format(label=label_phrase(label))


def real_guidance_augment(sample: MultimodalSample, prompt: str | None, strength: float, gen, seed: int,
                          image_source, new_id: str | None = None, image_ref: str | None = None,
                          template: str = DEFAULT_RG_TEMPLATE) -> AugmentationRecord:
    if not 0.0 <= strength <= 1.0:
        raise ConfigError(f"strength must lie in [0, 1], got {strength}")
    prompt = prompt or real_guidance_prompt(sample.label, template)
    new_id = new_id or f"{sample.sample_id}#aug1"
    image_ref = image_ref or augmented_image_ref(new_id, AugMethod.REAL_GUIDANCE, None, None)
    out = _generate(gen, image_source(sample), prompt, strength, seed)
    return AugmentationRecord(
        parent_id=sample.sample_id,
        method=AugMethod.REAL_GUIDANCE,
        params={"prompt": prompt, "strength": strength, "seed": seed, "image_ref": image_ref},
        verdict=Verdict.accepted(),
        new_sample=_augmented_sample(sample, new_id, image_ref),
        image=out,
    )


@dataclass(frozen=True)
class _Job:
    sample:    MultimodalSample
    new_id:    str
    image_ref: str
    params:    DiffuseMixParams | None = None
    seed:      int = 0


def _diffusemix_jobs(originals, plan: BalancePlan, rng: np.random.Generator, prompts, lam, strength,
                     mask_style) -> list[tuple[MultimodalSample, DiffuseMixParams]]:
    jobs = []
    for label, count in plan.targeted().items():
        pool = [s for s in originals if s.label is label]
        if not pool:
            raise DatasetError(f"plan asks for {count} {label} augmentations but the train split has none")
        for i in range(count):
            jobs.append((pool[i % len(pool)], DiffuseMixParams(
                prompt=prompts[int(rng.integers(len(prompts)))],
                lam=lam,
                mask_style=mask_style or HALF_STYLES[int(rng.integers(len(HALF_STYLES)))],
                fractal_seed=int(rng.integers(2 ** 31)),
                strength=strength,
                gen_seed=int(rng.integers(2 ** 31)),
            )))
    return jobs


def augment_image_corpus(
    samples,
    method: AugMethod | str,
    gen,
    image_source,
    seed: int = 0,
    *,
    plan: BalancePlan | None = None,
    prompts=DEFAULT_STYLE_PROMPTS,
    lam: float = DEFAULT_LAMBDA,
    mask_style: MaskStyle | str | None = None,
    strength: float | None = None,
    prompt_template: str = DEFAULT_RG_TEMPLATE,
    image_dir=None,
    image_root=None,
    existing_ids=(),
    workers: int = 1,
) -> list[AugmentationRecord]:
    """Augment train-split originals and save PNGs under image_dir.

    real_guidance : one record per input sample, in input order; already-augmented inputs
                    get a provenance rejection in place.
    diffusemix    : plan.counts[label] jobs per targeted label, cycling through that label's
                    originals in input order; prompt, mask and seeds drawn from default_rng(seed).
                    Records follow job order, then one provenance rejection per augmented input.
    """
    method = AugMethod(method)
    if gen is None:
        raise ConfigError(f"{method} needs an image generator backend")
    samples = list(samples)
    if any(s.split is not Split.TRAIN for s in samples):
        raise DatasetError("image augmentation applies to the train split only")
    originals = [s for s in samples if not s.is_augmented]
    image_dir = Path(image_dir) if image_dir is not None else None
    ids = ChildCounter([*existing_ids, *(s.sample_id for s in samples)])

    if method is AugMethod.REAL_GUIDANCE:
        strength = DEFAULT_RG_STRENGTH if strength is None else strength
        jobs = [(s, None) for s in originals]
    elif method is AugMethod.DIFFUSEMIX:
        if plan is None:
            raise ConfigError("diffusemix needs a BalancePlan")
        if not prompts:
            raise ConfigError("diffusemix needs at least one style prompt")
        strength = DEFAULT_DM_STRENGTH if strength is None else strength
        rng = np.random.default_rng(seed)
        jobs = _diffusemix_jobs(originals, plan, rng, list(prompts), lam, strength,
                                MaskStyle(mask_style) if mask_style else None)
    else:
        raise ConfigError(f"{method!r} is not an image augmentation method")

    planned = []
    for sample, params in jobs:
        new_id = ids.next(sample.sample_id)
        ref = augmented_image_ref(new_id, method, image_dir, image_root)
        planned.append(_Job(sample, new_id, ref, params, sample_seed(seed, new_id)))

    def run(job: _Job) -> AugmentationRecord:
        try:
            if method is AugMethod.REAL_GUIDANCE:
                return real_guidance_augment(job.sample, None, strength, gen, job.seed, image_source,
                                             job.new_id, job.image_ref, prompt_template)
            return diffusemix_augment(job.sample, job.params, gen, image_source, job.new_id, job.image_ref)
        except (BackendError, ValueError) as e:
            params = job.params.to_dict() if job.params else {"strength": strength, "seed": job.seed}
            return AugmentationRecord(job.sample.sample_id, method, params, Verdict.failed(str(e)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, planned))
    else:
        records = [run(j) for j in planned]

    if image_dir is not None:
        for r in records:
            if r.accepted:
                save_image(image_dir / Path(r.new_sample.image_ref).name, r.image)

    def rejected(s):
        return AugmentationRecord(s.sample_id, method, {}, Verdict.rejected("provenance"))

    if method is AugMethod.REAL_GUIDANCE:
        by_job = iter(records)
        return [rejected(s) if s.is_augmented else next(by_job) for s in samples]
    return records + [rejected(s) for s in samples if s.is_augmented]
