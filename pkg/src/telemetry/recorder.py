"""
JSON-Lines run logs: a recorder facade over a sink that owns the I/O.

EpochRecorder fixes the key order of every record so reruns produce byte-identical logs;
floats are written with json's shortest round-trip repr.
"""

import json
import math
from pathlib import Path

EPOCH_FIELDS = ("epoch", "train_loss", "train_accuracy", "dev_accuracy", "dev_weighted_f1")


class MemorySink:
    """Keeps lines in memory; used when a run has no output directory."""

    def __init__(self):
        self.lines: list[str] = []

    def write_line(self, line: str):
        self.lines.append(line)

    def close(self):
        pass


class JsonlSink:
    """Appends lines to a file, created (truncated) on open."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = open(self.path, "w", encoding="utf-8", newline="\n")

    def write_line(self, line: str):
        self._f.write(line + "\n")
        self._f.flush()

    def close(self):
        if self._f is not None:
            self._f.close()
            self._f = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class EpochRecorder:
    def __init__(self, sink=None, fields=EPOCH_FIELDS):
        self._sink = sink if sink is not None else MemorySink()
        self.fields = tuple(fields)
        self.records: list[dict] = []

    def record(self, **values) -> dict:
        missing = [f for f in self.fields if f not in values]
        extra = [k for k in values if k not in self.fields]
        if missing or extra:
            raise ValueError(f"epoch record fields: missing {missing}, unexpected {extra}")
        row = {f: values[f] for f in self.fields}
        for k, v in row.items():
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"{k} is not finite: {v}")
        self.records.append(row)
        self._sink.write_line(json.dumps(row))
        return row

    def close(self):
        self._sink.close()


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
