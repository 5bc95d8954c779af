"""
Run directory helpers shared by every stage script.

<run>/effective_config.json   config after overrides, rewritten by each stage
<run>/metadata.json           per-stage start/finish timestamps and status (the only timestamps)
<run>/outputs.json            relative path -> sha256 of every artifact a stage wrote

run_stage(stage, fn) runs a stage body and maps library errors to exit codes:
0 ok, 2 config/dataset error, 3 backend error, 4 numeric failure, 1 anything else.
"""

import hashlib
import json
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path

from errors import BenchError, DatasetError
from dataset.images import ImageStore
from dataset.manifest import load_manifest
from dataset.schema import Split

STAGES = ("ingest", "plan", "augment", "quality", "train", "eval", "report")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunDir:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def _update(self, name: str, fn):
        path = self.path(name)
        data = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
        fn(data)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def register(self, path) -> Path:
        """Record an artifact in outputs.json and print the PASS line."""
        path = Path(path)
        self.register_all([path], quiet=True)
        print(f"PASS -- wrote {path}")
        return path

    def register_all(self, paths, quiet: bool = False):
        digests = {Path(p).relative_to(self.root).as_posix(): sha256(p) for p in paths}
        self._update("outputs.json", lambda d: d.update(digests))
        if not quiet and digests:
            print(f"PASS -- wrote {len(digests)} file(s) under {Path(next(iter(digests))).parent}")

    def write_json(self, rel: str, obj) -> Path:
        path = self.path(rel)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
        return self.register(path)

    def write_text(self, rel: str, text: str) -> Path:
        path = self.path(rel)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        return self.register(path)

    def read_json(self, rel: str, producer: str):
        path = self.path(rel)
        if not path.exists():
            raise DatasetError(f"{path} not found -- run the {producer} stage first")
        return json.loads(path.read_text(encoding="utf-8"))

    def write_effective_config(self, raw: dict) -> Path:
        path = self.path("effective_config.json")
        path.write_text(json.dumps(raw, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def stamp(self, stage: str, **fields):
        def apply(d):
            d.setdefault("stages", {}).setdefault(stage, {}).update(fields)
        self._update("metadata.json", apply)

    # ---------------------------------------------------------------- ingested data

    def ingest_info(self) -> dict:
        return self.read_json("ingest/ingest.json", "ingest")

    def image_root(self) -> Path:
        return Path(self.ingest_info()["image_root"])

    def originals(self):
        """Samples of the canonical manifest written by the ingest stage."""
        path = self.path("ingest", "manifest.tsv")
        if not path.exists():
            raise DatasetError(f"{path} not found -- run the ingest stage first")
        return load_manifest(path, image_root=self.image_root(), check_images=False).samples

    def image_store(self) -> ImageStore:
        return ImageStore(self.image_root())

    def augment_runs(self) -> list[str]:
        """Method names with a records file under <run>/augment, sorted."""
        base = self.path("augment")
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if (p / "records.jsonl").exists())


def split_of(samples, split: Split) -> list:
    return [s for s in samples if s.split is split]


def run_stage(stage: str, fn):
    """Call fn(); on error print a FAIL line and exit with the error's code.
    fn returns the RunDir it wrote to, which gets the metadata stamp."""
    started = _now()
    try:
        run = fn()
    except BenchError as e:
        print(f"FAIL -- {stage}: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except Exception as e:
        traceback.print_exc()
        print(f"FAIL -- {stage}: unexpected {type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(1)
    if isinstance(run, RunDir):
        run.stamp(stage, started=started, finished=_now(), status="completed")
    sys.exit(0)
