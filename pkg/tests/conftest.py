"""
Shared pytest fixtures for all test modules in this directory.

pytest loads this file automatically before any test module; fixtures defined
here are available to every test_*.py file without an explicit import.
"""
import sys
import json
from pathlib import Path

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "pipelines" / "augment-bench" / "scripts"))

import pytest

from dataset.schema import LABEL_ORDER, Split
from dataset.synthetic import SynthSpec, generate, generate_samples


@pytest.fixture
def cfg():
    with open(ROOT / "src" / "config.json") as f:
        return json.load(f)


@pytest.fixture
def tiny_spec():
    """4 samples per class in train, 2 in dev and test, 16x16 images."""
    counts = {
        Split.TRAIN: dict.fromkeys(LABEL_ORDER, 4),
        Split.DEV:   dict.fromkeys(LABEL_ORDER, 2),
        Split.TEST:  dict.fromkeys(LABEL_ORDER, 2),
    }
    return SynthSpec(counts=counts, image_size=16, seed=7)


@pytest.fixture
def tiny_samples(tiny_spec):
    return generate_samples(tiny_spec)


@pytest.fixture
def tiny_corpus(tiny_spec, tmp_path):
    """Synthetic corpus written to disk; returns the manifest path."""
    return generate(tiny_spec, tmp_path / "corpus")


@pytest.fixture
def pipeline_raw(cfg, tiny_corpus, tmp_path):
    """Default config pointed at the tiny corpus, sized for fast training."""
    raw = json.loads(json.dumps(cfg))
    raw["out_dir"] = str(tmp_path / "run")
    raw["dataset"]["manifest"] = str(tiny_corpus)
    raw["dataset"]["image_root"] = None
    raw["fusion"].update({"d": 8, "heads": 2, "patch_size": 8, "n_buckets": 64})
    raw["train"].update({"epochs": 2, "image_size": 16, "batch_size": 8, "learning_rate": 0.01})
    return raw
