"""
Figures for the run summary. Called by report.py; also runnable on its own.

  01_class_distribution.png   per-split class counts, plus train counts after each augment run
  02_loss_curves.png          per-epoch training loss and dev weighted F1 of every trained model

Compute -- compute_*() functions read run artifacts and return plain dataclasses; no matplotlib.
Render  -- render_*() functions turn those dataclasses into figures; no file reading.

Usage:
  python pipelines/augment-bench/scripts/plots.py --out runs/default
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt                                       # noqa: E402
import numpy as np                                                    # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))
sys.path.insert(0, str(Path(__file__).parent))
from augment.records import accepted_samples, read_records           # noqa: E402
from dataset.schema import LABEL_ORDER, Split                         # noqa: E402
from telemetry.recorder import read_jsonl                             # noqa: E402
from configuration_loader import common_parser, load_from_args        # noqa: E402
from run_dir import RunDir, run_stage                                 # noqa: E402


@dataclass
class ClassBars:
    """
    Fields
    ------
    labels : label values in index order
    series : name -> counts aligned with labels ("train", "dev", "test", "train+<method>")
    """
    labels: list[str]
    series: dict[str, list[int]] = field(default_factory=dict)


@dataclass
class LossCurve:
    name:     str
    epochs:   list[int]
    loss:     list[float]
    dev_f1:   list[float | None]


def compute_class_distribution(run: RunDir) -> ClassBars:
    dist = run.read_json("ingest/distribution.json", "ingest")
    labels = [lb.value for lb in LABEL_ORDER]
    bars = ClassBars(labels)
    for split in Split:
        per = dist["counts"].get(split.value, {})
        if any(per.values()):
            bars.series[split.value] = [per.get(lb, 0) for lb in labels]
    train = bars.series.get(Split.TRAIN.value, [0] * len(labels))
    for m in run.augment_runs():
        extra = dict.fromkeys(labels, 0)
        for s in accepted_samples(read_records(run.path("augment", m, "records.jsonl"))):
            extra[s.label.value] += 1
        bars.series[f"train+{m}"] = [c + extra[lb] for c, lb in zip(train, labels)]
    return bars


def compute_loss_curves(run: RunDir) -> list[LossCurve]:
    base = run.path("train")
    if not base.is_dir():
        return []
    curves = []
    for log in sorted(base.glob("*/epochs.jsonl")):
        rows = read_jsonl(log)
        curves.append(LossCurve(
            name=log.parent.name,
            epochs=[r["epoch"] for r in rows],
            loss=[r["train_loss"] for r in rows],
            dev_f1=[r["dev_weighted_f1"] for r in rows],
        ))
    return curves


def render_class_distribution(bars: ClassBars, label: str) -> "plt.Figure":
    fig, ax = plt.subplots(1, 1, figsize=(10, 5))
    names = list(bars.series)
    x = np.arange(len(bars.labels))
    width = 0.8 / max(len(names), 1)
    for i, name in enumerate(names):
        counts = bars.series[name]
        rects = ax.bar(x + (i - (len(names) - 1) / 2) * width, counts, width, label=name)
        ax.bar_label(rects, fontsize=7, padding=1)
    ax.set_xticks(x)
    ax.set_xticklabels([lb.replace("_", "\n") for lb in bars.labels], fontsize=8)
    ax.set_ylabel("samples")
    ax.set_title(f"Class distribution -- {label}")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def render_loss_curves(curves: list[LossCurve], label: str) -> "plt.Figure":
    fig, (ax_loss, ax_f1) = plt.subplots(2, 1, figsize=(10, 8), sharex=True)
    for c in curves:
        line, = ax_loss.plot(c.epochs, c.loss, marker="o", markersize=3, label=c.name)
        f1 = [np.nan if v is None else v for v in c.dev_f1]
        if not np.all(np.isnan(f1)):
            ax_f1.plot(c.epochs, f1, marker="o", markersize=3, color=line.get_color(), label=c.name)
    ax_loss.set_ylabel("train loss (cross-entropy)")
    ax_loss.set_title(f"Training curves -- {label}")
    ax_loss.grid(alpha=0.3)
    ax_f1.set_ylabel("dev weighted F1")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylim(0.0, 1.0)
    ax_f1.grid(alpha=0.3)
    if curves:
        ax_loss.legend(fontsize=8)
    fig.tight_layout()
    return fig


def write_figures(run: RunDir) -> list[Path]:
    """Render both figures into <run>/report/; the loss figure is skipped before training."""
    out_dir = run.path("report")
    out_dir.mkdir(parents=True, exist_ok=True)
    label = run.root.name
    written = []

    fig = render_class_distribution(compute_class_distribution(run), label)
    out = out_dir / "01_class_distribution.png"
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(out)

    curves = compute_loss_curves(run)
    if curves:
        fig = render_loss_curves(curves, label)
        out = out_dir / "02_loss_curves.png"
        fig.savefig(out, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(out)
    else:
        print("WARN -- skipped 02_loss_curves.png: no training logs")
    return written


def main():
    args = common_parser("Render the run figures.").parse_args()

    def body():
        cfg, _ = load_from_args(args)
        run = RunDir(cfg.out_dir)
        for p in write_figures(run):
            print(f"Saved: {p}")
        return None

    run_stage("plots", body)


if __name__ == "__main__":
    main()
