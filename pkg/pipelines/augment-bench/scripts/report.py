"""
Stage 7 -- report.

Human view only. Every number in summary.md is read from artifacts the earlier stages wrote
(ingest/, plan/, augment/*/summary.json, quality/, train/*/result.json, eval/comparison.*);
the report adds no information of its own. Sections of stages that have not run read
"not run".

Renders templates/summary.md via string.Template and draws the two figures of plots.py.

Writes:
  <run>/report/summary.md
  <run>/report/01_class_distribution.png
  <run>/report/02_loss_curves.png       (only once training logs exist)

Prerequisites: ingest.
"""

import sys
from pathlib import Path
from string import Template

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from dataset.schema import LABEL_ORDER, Split                           # noqa: E402
from configuration_loader import common_parser, load_from_args          # noqa: E402
from plots import write_figures                                         # noqa: E402
from run_dir import RunDir, run_stage                                   # noqa: E402

_TEMPLATE = Path(__file__).parent.parent / "templates" / "summary.md"
_NOT_RUN = "_not run_"


def _fmt(val, fmt=".4f"):
    if val is None:
        return "-"
    return f"{val:{fmt}}"


def _table(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def _optional_json(run: RunDir, rel: str):
    path = run.path(rel)
    return run.read_json(rel, "") if path.exists() else None


def distribution_table(dist: dict) -> str:
    splits = [s.value for s in Split]
    rows = [[lb.value, *(dist["counts"].get(s, {}).get(lb.value, 0) for s in splits)] for lb in LABEL_ORDER]
    rows.append(["**total**", *(dist["totals"].get(s, 0) for s in splits)])
    return _table(["label", *splits], rows)


def plan_table(plan: dict | None) -> str:
    if plan is None:
        return _NOT_RUN
    rows = [[lb, n, "yes" if lb in plan["targets"] else "no"] for lb, n in plan["counts"].items()]
    return (f"Factor {plan['factor']}, {plan['total']} composites planned.\n\n"
            + _table(["label", "composites", "targeted"], rows))


def augment_table(run: RunDir) -> str:
    methods = run.augment_runs()
    if not methods:
        return _NOT_RUN
    rows = []
    for m in methods:
        s = run.read_json(f"augment/{m}/summary.json", "augment")
        v = s["verdicts"]
        rows.append([m, v["accepted"], v["rejected"], v["failed"], s["train_before"], s["train_after"]])
    return _table(["method", "accepted", "rejected", "failed", "train before", "train after"], rows)


def gate_lines(gate: dict | None) -> tuple[str, str]:
    if gate is None:
        return "not run", ""
    failures = [f"- `{c['name']}`: {c['detail']}" for c in gate["checks"] if c["status"] == "FAIL"]
    return ("PASS" if gate["passed"] else "FAIL"), "\n".join(failures)


def training_table(run: RunDir) -> str:
    results = sorted(run.path("train").glob("*/result.json")) if run.path("train").is_dir() else []
    if not results:
        return _NOT_RUN
    rows = []
    for p in results:
        r = run.read_json(p.relative_to(run.root).as_posix(), "train")
        rows.append([p.parent.name, r["n_train"], r["n_dev"], r["n_parameters"],
                     _fmt(r["final_loss"]), r["best_epoch"], _fmt(r["best_dev_f1"])])
    return _table(["model", "train bundles", "dev", "parameters", "final loss", "best epoch", "best dev F1"],
                  rows)


def build_report(cfg, run: RunDir) -> str:
    info = run.ingest_info()
    dist = run.read_json("ingest/distribution.json", "ingest")
    gate_status, gate_failures = gate_lines(_optional_json(run, "quality/gate.json"))
    quality_path = run.path("quality", "quality_table.txt")
    comparison_path = run.path("eval", "comparison.txt")
    comparison = _optional_json(run, "eval/comparison.json")

    return Template(_TEMPLATE.read_text(encoding="utf-8")).substitute(
        run_name=run.root.name,
        run_dir=run.root.as_posix(),
        seed=cfg.seed,
        source=info["source"],
        n_samples=info["n_samples"],
        n_row_errors=len(info["row_errors"]),
        n_missing_images=len(info["missing_images"]),
        archs=", ".join(a.value for a in cfg.archs),
        variants=", ".join(cfg.training.variants),
        distribution_table=distribution_table(dist),
        plan_table=plan_table(_optional_json(run, "plan/balance_plan.json")),
        augment_table=augment_table(run),
        quality_table=quality_path.read_text(encoding="utf-8").rstrip() if quality_path.exists() else "not run",
        gate_status=gate_status,
        gate_failures=gate_failures,
        training_table=training_table(run),
        loss_figure=("![loss curves](02_loss_curves.png)"
                     if run.path("report", "02_loss_curves.png").exists() else ""),
        eval_split=comparison["split"] if comparison else "-",
        comparison_table=(comparison_path.read_text(encoding="utf-8").rstrip()
                          if comparison_path.exists() else "not run"),
    )


def report(cfg, run: RunDir) -> Path:
    run.register_all(write_figures(run))
    return run.write_text("report/summary.md", build_report(cfg, run))


def main():
    args = common_parser("Render the run summary and figures.").parse_args()

    def body():
        cfg, raw = load_from_args(args)
        run = RunDir(cfg.out_dir)
        run.write_effective_config(raw)
        report(cfg, run)
        return run

    run_stage("report", body)


if __name__ == "__main__":
    main()
