"""
AugmentationRecord -- one attempted augmentation, its parameters and its verdict.

Records are written as JSON-Lines, one per attempt, in input order. Rejected and failed
attempts are kept in the record file for accounting but never reach a training manifest.
"""

import json
import re
import zlib
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

from errors import DatasetError
from dataset.manifest import sample_from_row, sample_to_row
from dataset.schema import MultimodalSample, Provenance


class AugMethod(StrEnum):
    BACK_TRANSLATION = "back_translation"
    PARAPHRASE       = "paraphrase"
    CAPTION_CONCAT   = "caption_concat"
    REAL_GUIDANCE    = "real_guidance"
    DIFFUSEMIX       = "diffusemix"
    PAIRED           = "paired"


TEXT_METHODS  = (AugMethod.BACK_TRANSLATION, AugMethod.PARAPHRASE, AugMethod.CAPTION_CONCAT)
IMAGE_METHODS = (AugMethod.REAL_GUIDANCE, AugMethod.DIFFUSEMIX)


class VerdictStatus(StrEnum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    FAILED   = "failed"


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    reason: str | None = None

    @classmethod
    def accepted(cls) -> "Verdict":
        return cls(VerdictStatus.ACCEPTED)

    @classmethod
    def rejected(cls, reason: str) -> "Verdict":
        return cls(VerdictStatus.REJECTED, reason)

    @classmethod
    def failed(cls, error: str) -> "Verdict":
        return cls(VerdictStatus.FAILED, error)

    @property
    def is_accepted(self) -> bool:
        return self.status is VerdictStatus.ACCEPTED

    def to_dict(self) -> dict:
        return {"status": self.status.value, "reason": self.reason}


@dataclass
class AugmentationRecord:
    """
    Fields
    ------
    parent_id  : sample_id of the sample the augmentation was derived from.
    method     : AugMethod tag.
    params     : Every parameter that determined the output (thresholds, seeds, transcript...).
    verdict    : accepted / rejected(reason) / failed(error).
    new_sample : The augmented sample; present only when accepted.
    image      : In-memory augmented image (not serialized; image methods save it as PNG).
    """
    parent_id:  str
    method:     AugMethod
    params:     dict
    verdict:    Verdict
    new_sample: MultimodalSample | None = None
    image:      object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.verdict.is_accepted:
            if self.new_sample is None:
                raise ValueError(f"accepted record for {self.parent_id} has no sample")
            if self.new_sample.provenance is not Provenance.AUGMENTED:
                raise ValueError(f"{self.new_sample.sample_id}: augmented sample must have provenance=augmented")
        elif self.new_sample is not None:
            raise ValueError(f"{self.verdict.status} record for {self.parent_id} must not carry a sample")

    @property
    def accepted(self) -> bool:
        return self.verdict.is_accepted

    def to_dict(self) -> dict:
        return {
            "parent_id":  self.parent_id,
            "method":     self.method.value,
            "verdict":    self.verdict.to_dict(),
            "params":     self.params,
            "new_sample": sample_to_row(self.new_sample) if self.new_sample else None,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AugmentationRecord":
        verdict = raw["verdict"]
        return cls(
            parent_id=raw["parent_id"],
            method=AugMethod(raw["method"]),
            params=raw.get("params", {}),
            verdict=Verdict(VerdictStatus(verdict["status"]), verdict.get("reason")),
            new_sample=sample_from_row(raw["new_sample"]) if raw.get("new_sample") else None,
        )


_AUG_ID = re.compile(r"#aug(\d+)$")


def sample_seed(seed: int, sample_id: str) -> int:
    """Per-sample seed that depends on the sample, never on its position in the corpus."""
    return (seed * 1_000_003 + zlib.crc32(sample_id.encode("utf-8"))) % (2 ** 31)


def child_id(parent_id: str, k: int) -> str:
    return f"{parent_id}#aug{k}"


class ChildCounter:
    """Hands out '{parent_id}#aug{k}' ids, k continuing after the parent's existing children."""

    def __init__(self, existing_ids=()):
        self._used: dict[str, int] = {}
        for sid in existing_ids:
            m = _AUG_ID.search(sid)
            if m:
                parent = sid[:m.start()]
                self._used[parent] = max(self._used.get(parent, 0), int(m.group(1)))

    def next(self, parent_id: str) -> str:
        k = self._used.get(parent_id, 0) + 1
        self._used[parent_id] = k
        return child_id(parent_id, k)


def accepted_samples(records) -> list[MultimodalSample]:
    return [r.new_sample for r in records if r.accepted]


def verdict_counts(records) -> dict[str, int]:
    counts = {s.value: 0 for s in VerdictStatus}
    for r in records:
        counts[r.verdict.status.value] += 1
    return counts


def write_records(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    return path


def read_records(path) -> list[AugmentationRecord]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"records file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(AugmentationRecord.from_dict(json.loads(line)))
            except (KeyError, ValueError) as e:
                raise DatasetError(f"{path}:{n}: malformed record: {e}") from e
    return records
