"""
Dataset schema for CrisisMMD-shaped multimodal manifests.

One MultimodalSample is one tweet: text, a reference to one RGB image, the humanitarian
label, the split it belongs to, and whether it is an original or an augmented row.
Tweets with several images are expected to be flattened to one row per image upstream.
"""

import re
from dataclasses import dataclass, field
from enum import StrEnum

from errors import DatasetError


class HumanitarianLabel(StrEnum):
    AFFECTED_INDIVIDUALS  = "affected_individuals"
    INFRASTRUCTURE_DAMAGE = "infrastructure_damage"
    NOT_HUMANITARIAN      = "not_humanitarian"
    OTHER_RELEVANT        = "other_relevant"
    RESCUE_VOLUNTEERING   = "rescue_volunteering"


class Split(StrEnum):
    TRAIN = "train"
    DEV   = "dev"
    TEST  = "test"


class Provenance(StrEnum):
    ORIGINAL  = "original"
    AUGMENTED = "augmented"


# Fixed label <-> index mapping used by every model and metric.
LABEL_ORDER: tuple[HumanitarianLabel, ...] = tuple(HumanitarianLabel)
N_CLASSES = len(LABEL_ORDER)

# Underrepresented classes; the only ones DiffuseMix balancing may target.
MINORITY_LABELS: frozenset[HumanitarianLabel] = frozenset({
    HumanitarianLabel.AFFECTED_INDIVIDUALS,
    HumanitarianLabel.INFRASTRUCTURE_DAMAGE,
    HumanitarianLabel.RESCUE_VOLUNTEERING,
})

# Long-form CrisisMMD label names, keyed by their normalized form.
_ALIASES = {
    "infrastructure_and_utility_damage":      HumanitarianLabel.INFRASTRUCTURE_DAMAGE,
    "other_relevant_information":             HumanitarianLabel.OTHER_RELEVANT,
    "rescue_volunteering_or_donation_effort": HumanitarianLabel.RESCUE_VOLUNTEERING,
}


def _normalize_key(text: str) -> str:
    return re.sub(r"[\s_\-]+", "_", text.strip().lower())


def normalize_label(text: str) -> HumanitarianLabel:
    """Map free-form label text onto the 5-way enumeration.

    Case-insensitive; spaces, underscores and hyphens are interchangeable.
    Raises DatasetError("unknown label ...") for anything outside the enumeration.
    """
    key = _normalize_key(text)
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return HumanitarianLabel(key)
    except ValueError:
        raise DatasetError(f"unknown label {text!r}") from None


def label_index(label: HumanitarianLabel) -> int:
    return LABEL_ORDER.index(label)


def label_from_index(index: int) -> HumanitarianLabel:
    return LABEL_ORDER[index]


def label_phrase(label: HumanitarianLabel) -> str:
    """Human-readable phrase for prompts, e.g. 'infrastructure damage'."""
    return label.value.replace("_", " ")


@dataclass(frozen=True)
class MultimodalSample:
    sample_id:  str
    tweet_text: str
    image_ref:  str
    label:      HumanitarianLabel
    split:      Split
    provenance: Provenance = Provenance.ORIGINAL
    parent_id:  str | None = None

    def __post_init__(self):
        if not self.sample_id:
            raise DatasetError("sample_id must be non-empty")
        if not self.tweet_text.strip():
            raise DatasetError(f"{self.sample_id}: tweet_text must be non-empty")
        if self.provenance is Provenance.AUGMENTED and not self.parent_id:
            raise DatasetError(f"{self.sample_id}: augmented sample needs parent_id")
        if self.provenance is Provenance.ORIGINAL and self.parent_id:
            raise DatasetError(f"{self.sample_id}: original sample must not carry parent_id")

    @property
    def is_augmented(self) -> bool:
        return self.provenance is Provenance.AUGMENTED


@dataclass(frozen=True)
class ClassDistribution:
    """
    Per-split class counts, computed by stats.class_distribution().

    Fields
    ------
    counts : split -> label -> count. Every split and every label is present (zeros included).
    totals : split -> total samples in that split; equals the sum of the split's counts.
    """
    counts: dict[Split, dict[HumanitarianLabel, int]] = field(default_factory=dict)
    totals: dict[Split, int] = field(default_factory=dict)

    def __post_init__(self):
        for split, per_label in self.counts.items():
            if any(c < 0 for c in per_label.values()):
                raise DatasetError(f"negative count in split {split}")
            if self.totals.get(split, 0) != sum(per_label.values()):
                raise DatasetError(f"total for split {split} does not match its class counts")

    def count(self, split: Split, label: HumanitarianLabel) -> int:
        return self.counts.get(split, {}).get(label, 0)

    def to_dict(self) -> dict:
        return {
            "counts": {s.value: {lb.value: c for lb, c in per.items()} for s, per in self.counts.items()},
            "totals": {s.value: t for s, t in self.totals.items()},
        }
