"""
Class statistics over a set of samples.

class_distribution(samples) -> ClassDistribution
imbalance_report(dist)      -> list[ImbalanceRow]   train split, descending by count
"""

from collections import Counter
from dataclasses import dataclass

from errors import DatasetError
from dataset.schema import (
    LABEL_ORDER,
    ClassDistribution,
    HumanitarianLabel,
    Split,
)

# Class distribution of the agreed-upon CrisisMMD humanitarian subset.
CRISISMMD_COUNTS: dict[Split, dict[HumanitarianLabel, int]] = {
    Split.TRAIN: {
        HumanitarianLabel.AFFECTED_INDIVIDUALS:  71,
        HumanitarianLabel.INFRASTRUCTURE_DAMAGE: 612,
        HumanitarianLabel.NOT_HUMANITARIAN:      3252,
        HumanitarianLabel.OTHER_RELEVANT:        1279,
        HumanitarianLabel.RESCUE_VOLUNTEERING:   912,
    },
    Split.DEV: {
        HumanitarianLabel.AFFECTED_INDIVIDUALS:  9,
        HumanitarianLabel.INFRASTRUCTURE_DAMAGE: 80,
        HumanitarianLabel.NOT_HUMANITARIAN:      521,
        HumanitarianLabel.OTHER_RELEVANT:        239,
        HumanitarianLabel.RESCUE_VOLUNTEERING:   149,
    },
    Split.TEST: {
        HumanitarianLabel.AFFECTED_INDIVIDUALS:  9,
        HumanitarianLabel.INFRASTRUCTURE_DAMAGE: 81,
        HumanitarianLabel.NOT_HUMANITARIAN:      504,
        HumanitarianLabel.OTHER_RELEVANT:        235,
        HumanitarianLabel.RESCUE_VOLUNTEERING:   126,
    },
}


@dataclass(frozen=True)
class ImbalanceRow:
    label:    HumanitarianLabel
    count:    int
    fraction: float


def class_distribution(samples) -> ClassDistribution:
    """Count samples per (split, label). Order of the input does not matter."""
    tally = Counter((s.split, s.label) for s in samples)
    counts = {split: {label: tally.get((split, label), 0) for label in LABEL_ORDER}
              for split in Split}
    totals = {split: sum(per.values()) for split, per in counts.items()}
    return ClassDistribution(counts=counts, totals=totals)


def imbalance_report(dist: ClassDistribution) -> list[ImbalanceRow]:
    """Train-split labels ranked by count (ties broken by label order).
    Fractions are count / train total and sum to 1."""
    total = dist.totals.get(Split.TRAIN, 0)
    if total <= 0:
        raise DatasetError("imbalance report needs a non-empty train split")
    rows = [ImbalanceRow(label, dist.count(Split.TRAIN, label), dist.count(Split.TRAIN, label) / total)
            for label in LABEL_ORDER]
    return sorted(rows, key=lambda r: (-r.count, LABEL_ORDER.index(r.label)))
