"""
Stage 2 -- plan.

Ranks the train-split classes by size and plans how many DiffuseMix augmentations each
targeted minority class receives: floor(factor x train count).

Writes:
  <run>/plan/imbalance.json      train labels by descending count with fractions
  <run>/plan/balance_plan.json   {"factor", "targets", "counts": {label: n}, "total"}

Usage:
  python pipelines/augment-bench/scripts/plan.py [--factor 1.0] [--target affected_individuals ...]
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from augment.image import BalancePlan, plan_balance          # noqa: E402
from dataset.stats import class_distribution, imbalance_report  # noqa: E402
from configuration_loader import common_parser, load_from_args  # noqa: E402
from run_dir import RunDir, run_stage                        # noqa: E402


def plan(cfg, run: RunDir) -> BalancePlan:
    dist = class_distribution(run.originals())
    rows = imbalance_report(dist)
    run.write_json("plan/imbalance.json", [
        {"label": r.label.value, "count": r.count, "fraction": r.fraction} for r in rows
    ])
    img = cfg.image_aug
    balance = plan_balance(dist, img.targets, img.factor)
    run.write_json("plan/balance_plan.json", {
        "factor":  img.factor,
        "targets": [t.value for t in img.targets],
        "counts":  balance.to_dict(),
        "total":   balance.total,
    })
    for label, n in balance.targeted().items():
        print(f"  {label.value:<24} +{n}")
    return balance


def load_plan(run: RunDir) -> BalancePlan:
    raw = run.read_json("plan/balance_plan.json", "plan")
    return BalancePlan({k: int(v) for k, v in raw["counts"].items()})


def current_plan(cfg, run: RunDir) -> BalancePlan:
    """The stored plan, re-planned (and rewritten) when image_aug.factor or targets differ from it."""
    raw = run.read_json("plan/balance_plan.json", "plan")
    img = cfg.image_aug
    if raw["factor"] == img.factor and raw["targets"] == [t.value for t in img.targets]:
        return load_plan(run)
    print(f"WARN -- stored plan has factor {raw['factor']}; re-planning with factor {img.factor}")
    return plan(cfg, run)


def main():
    parser = common_parser("Plan class-targeted image augmentation.")
    parser.add_argument("--factor", type=float, help="augmentations per existing train sample")
    parser.add_argument("--target", action="append", default=[], help="minority label to target (repeatable)")
    args = parser.parse_args()

    extra = []
    if args.factor is not None:
        extra.append(f"image_aug.factor={args.factor}")
    if args.target:
        extra.append(f"image_aug.targets={json.dumps(args.target)}")

    def body():
        cfg, raw = load_from_args(args, extra)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        plan(cfg, run)
        return run

    run_stage("plan", body)


if __name__ == "__main__":
    main()
