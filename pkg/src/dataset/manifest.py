"""
Manifest ingestion and writing -- TSV and JSON-Lines.

Functions
---------
load_manifest(path, fmt=None, image_root=None, default_split=None) -> ManifestLoad
    Parse every row into a MultimodalSample or a RowError. Duplicate sample_id is fatal.
write_manifest(path, samples, fmt=None)
    Write samples with the fixed column order. Inverse of load_manifest for canonical files.
sample_to_row(sample) / sample_from_row(row)
    Single-row codec shared with augmentation records.
resolve_image_path(ref, image_root) -> Path

TSV files use no quoting: a leading or unbalanced `"` in tweet text is kept as is. Tab, newline
and backslash inside a field are escaped with a backslash; carriage returns are written as
newlines.

Both formats carry the same fields:
  sample_id, tweet_text, image_ref, label, split, provenance, parent_id
provenance and parent_id may be empty (original row). CrisisMMD's own TSV headers are
accepted through column aliases (image_id, image, label_text).
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from errors import DatasetError
from dataset.schema import (
    MultimodalSample,
    Provenance,
    Split,
    normalize_label,
)

COLUMNS = ("sample_id", "tweet_text", "image_ref", "label", "split", "provenance", "parent_id")
REQUIRED_COLUMNS = ("sample_id", "tweet_text", "image_ref", "label", "split")

_COLUMN_ALIASES = {
    "image_id":   "sample_id",
    "image":      "image_ref",
    "label_text": "label",
}

_FORMATS = ("tsv", "jsonl")

_TSV = dict(delimiter="\t", quoting=csv.QUOTE_NONE, quotechar=None, escapechar="\\", lineterminator="\n")


@dataclass(frozen=True)
class RowError:
    row:       int          # 1-based data row number (header excluded)
    sample_id: str | None
    message:   str


@dataclass
class ManifestLoad:
    """
    Result of load_manifest().

    Fields
    ------
    samples        : Successfully parsed samples, in file order.
    row_errors     : Rows that were rejected, with a diagnostic each.
    missing_images : image_ref values whose file could not be found (warning only).
    """
    samples:        list[MultimodalSample] = field(default_factory=list)
    row_errors:     list[RowError] = field(default_factory=list)
    missing_images: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)


def infer_format(path: Path, fmt: str | None = None) -> str:
    if fmt is not None:
        if fmt not in _FORMATS:
            raise DatasetError(f"unsupported manifest format {fmt!r}; expected one of {_FORMATS}")
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix in (".tsv", ".txt"):
        return "tsv"
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    raise DatasetError(f"cannot infer manifest format from {path}")


def resolve_image_path(ref: str, image_root: Path | None) -> Path:
    p = Path(ref)
    if p.is_absolute() or image_root is None:
        return p
    return Path(image_root) / p


def _read_rows(path: Path, fmt: str) -> tuple[list[dict], list[str]]:
    if fmt == "tsv":
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f, **_TSV)
            rows = [dict(r) for r in reader]
            header = reader.fieldnames or []
    else:
        rows, header = [], []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetError(f"{path}:{lineno}: invalid JSON: {e}") from e
                if not isinstance(obj, dict):
                    raise DatasetError(f"{path}:{lineno}: expected a JSON object")
                rows.append(obj)
                header.extend(k for k in obj if k not in header)

    header = [_COLUMN_ALIASES.get(h, h) for h in header]
    rows = [{_COLUMN_ALIASES.get(k, k): v for k, v in r.items()} for r in rows]
    return rows, header


def _text(row: dict, key: str) -> str:
    v = row.get(key)
    return "" if v is None else str(v)


def load_manifest(
    path,
    fmt: str | None = None,
    image_root=None,
    default_split: Split | str | None = None,
    check_images: bool = True,
) -> ManifestLoad:
    """Load a manifest file. Raises DatasetError on fatal problems (missing file,
    missing required columns, duplicate sample_id); everything else is a RowError."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    fmt = infer_format(path, fmt)
    rows, header = _read_rows(path, fmt)

    required = [c for c in REQUIRED_COLUMNS if not (c == "split" and default_split is not None)]
    missing = [c for c in required if c not in header]
    if rows and missing:
        raise DatasetError(f"{path}: missing columns {', '.join(missing)}")

    image_root = Path(image_root) if image_root is not None else path.parent
    result = ManifestLoad()
    parsed: list[tuple[int, MultimodalSample]] = []
    seen: set[str] = set()

    for i, row in enumerate(rows, start=1):
        sample_id = _text(row, "sample_id").strip()
        if not sample_id:
            result.row_errors.append(RowError(i, None, "empty sample_id"))
            continue
        if sample_id in seen:
            raise DatasetError(f"{path}: duplicate sample_id {sample_id!r} at row {i}")
        seen.add(sample_id)
        try:
            sample = MultimodalSample(
                sample_id=sample_id,
                tweet_text=_text(row, "tweet_text"),
                image_ref=_text(row, "image_ref"),
                label=normalize_label(_text(row, "label")),
                split=Split(_text(row, "split").strip().lower() or str(default_split)),
                provenance=Provenance(_text(row, "provenance").strip().lower() or "original"),
                parent_id=_text(row, "parent_id").strip() or None,
            )
        except ValueError as e:
            result.row_errors.append(RowError(i, sample_id or None, str(e)))
            continue
        parsed.append((i, sample))

    # Second pass: augmented rows must resolve to a parent in the same split.
    by_id = {s.sample_id: s for _, s in parsed}
    for i, sample in parsed:
        if sample.is_augmented:
            parent = by_id.get(sample.parent_id)
            if parent is None:
                result.row_errors.append(RowError(i, sample.sample_id,
                                                  f"parent_id {sample.parent_id!r} not found"))
                continue
            if parent.split is not sample.split:
                result.row_errors.append(RowError(
                    i, sample.sample_id,
                    f"split {sample.split} differs from parent split {parent.split}"))
                continue
        result.samples.append(sample)

    for sample in (result.samples if check_images else ()):
        if not resolve_image_path(sample.image_ref, image_root).exists():
            result.missing_images.append(sample.image_ref)
    if result.missing_images:
        warnings.warn(f"{path}: {len(result.missing_images)} image file(s) not found "
                      f"(first: {result.missing_images[0]})", stacklevel=2)
    return result


def sample_to_row(sample: MultimodalSample) -> dict:
    return {
        "sample_id":  sample.sample_id,
        "tweet_text": sample.tweet_text,
        "image_ref":  sample.image_ref,
        "label":      sample.label.value,
        "split":      sample.split.value,
        "provenance": sample.provenance.value,
        "parent_id":  sample.parent_id or "",
    }


def sample_from_row(row: dict) -> MultimodalSample:
    """Inverse of sample_to_row for a single canonical row (no parent resolution)."""
    return MultimodalSample(
        sample_id=_text(row, "sample_id"),
        tweet_text=_text(row, "tweet_text"),
        image_ref=_text(row, "image_ref"),
        label=normalize_label(_text(row, "label")),
        split=Split(_text(row, "split")),
        provenance=Provenance(_text(row, "provenance") or "original"),
        parent_id=_text(row, "parent_id") or None,
    )


def write_manifest(path, samples, fmt: str | None = None) -> Path:
    """Write samples to path with the fixed column order; returns the path."""
    path = Path(path)
    fmt = infer_format(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "tsv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=COLUMNS, **_TSV)
            writer.writeheader()
            for s in samples:
                row = sample_to_row(s)
                row["tweet_text"] = row["tweet_text"].replace("\r\n", "\n").replace("\r", "\n")
                writer.writerow(row)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for s in samples:
                f.write(json.dumps(sample_to_row(s), ensure_ascii=False) + "\n")
    return path


def check_images_exist(samples, image_root) -> None:
    """Train- and eval-time check: every referenced image must exist."""
    missing = [s.image_ref for s in samples
               if not resolve_image_path(s.image_ref, image_root).exists()]
    if missing:
        raise DatasetError(f"{len(missing)} image file(s) missing, first: {missing[0]}")
