"""
Stage 1 -- ingest.

Loads the dataset manifest named in the config, reports rejected rows and missing images,
and writes a canonical copy plus the class distribution into the run directory. The source
manifest is only read.

Writes:
  <run>/ingest/manifest.tsv        canonical manifest (fixed column order)
  <run>/ingest/distribution.json   per-split class counts
  <run>/ingest/ingest.json         source path, image root, row errors, missing images

Usage:
  python pipelines/augment-bench/scripts/ingest.py [--config src/config.json] [--out runs/x]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from errors import DatasetError                                              # noqa: E402
from dataset.manifest import load_manifest, write_manifest                   # noqa: E402
from dataset.stats import class_distribution                                 # noqa: E402
from configuration_loader import check_paths, common_parser, load_from_args  # noqa: E402
from run_dir import RunDir, run_stage                                        # noqa: E402


def ingest(cfg, run: RunDir) -> list:
    check_paths(cfg)
    ds = cfg.dataset
    image_root = ds.image_root or ds.manifest.parent
    load = load_manifest(ds.manifest, ds.format, image_root, ds.default_split)
    for err in load.row_errors:
        print(f"WARN -- row {err.row} ({err.sample_id}): {err.message}")
    if not load.samples:
        raise DatasetError(f"{ds.manifest}: no valid rows")

    run.register(write_manifest(run.path("ingest", "manifest.tsv"), load.samples, "tsv"))
    run.write_json("ingest/distribution.json", class_distribution(load.samples).to_dict())
    run.write_json("ingest/ingest.json", {
        "source":         str(ds.manifest),
        "image_root":     str(Path(image_root).resolve()),
        "n_samples":      len(load.samples),
        "row_errors":     [{"row": e.row, "sample_id": e.sample_id, "message": e.message}
                           for e in load.row_errors],
        "missing_images": load.missing_images,
    })
    return load.samples


def main():
    args = common_parser("Ingest the dataset manifest into a run directory.").parse_args()

    def body():
        cfg, raw = load_from_args(args)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        ingest(cfg, run)
        return run

    run_stage("ingest", body)


if __name__ == "__main__":
    main()
