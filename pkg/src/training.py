"""
Training loop, evaluation and comparison tables.

Functions
---------
train(model, train_bundles, dev_bundles, config, recorder=None) -> TrainResult
evaluate(model, bundles, batch_size=256) -> EvalReport
comparison_report(runs) -> ComparisonTable

Training batches are drawn from the bundles sorted by sample_id, shuffled per epoch by a
generator seeded with config.seed; with toy encoders a fixed seed reproduces the epoch log
bit for bit. Evaluation always feeds the original pair only.
"""

from dataclasses import dataclass, field

import numpy as np

from errors import ConfigError, NumericError
from core.fusion import FusionModel, ViewBundle, ViewFeatures, loss_and_gradients
from core.optim import AdamW
from metrics.classification import EvalReport, accuracy, weighted_f1
from telemetry.recorder import EpochRecorder


@dataclass(frozen=True)
class TrainConfig:
    """
    Fields
    ------
    epochs        : Full passes over the train bundles (no early stopping).
    learning_rate : AdamW step size; 0 freezes the parameters.
    weight_decay  : Decoupled decay coefficient.
    batch_size    : Bundles per optimizer step; the last batch may be smaller.
    seed          : Shuffle seed.
    image_size    : Square input size for images (must match the model's FusionConfig).
    """
    epochs:        int = 10
    learning_rate: float = 1e-3
    weight_decay:  float = 0.01
    batch_size:    int = 32
    seed:          int = 0
    image_size:    int = 224

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1 or self.image_size < 1:
            raise ConfigError("batch_size and image_size must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs":        self.epochs,
            "learning_rate": self.learning_rate,
            "weight_decay":  self.weight_decay,
            "batch_size":    self.batch_size,
            "seed":          self.seed,
            "image_size":    self.image_size,
        }


@dataclass
class TrainResult:
    """
    Fields
    ------
    model       : The model after the last epoch (final parameters stay applied).
    log         : One dict per epoch, keys as telemetry.recorder.EPOCH_FIELDS.
    best_params : Parameters of the epoch with the highest dev weighted F1 (first on ties);
                  the last epoch when no dev bundles were given.
    best_epoch  : 1-based epoch of best_params.
    best_dev_f1 : Dev weighted F1 of best_params, None without dev bundles.
    """
    model:       FusionModel
    log:         list[dict] = field(default_factory=list)
    best_params: dict = field(default_factory=dict)
    best_epoch:  int = 0
    best_dev_f1: float | None = None

    @property
    def losses(self) -> list[float]:
        return [row["train_loss"] for row in self.log]


def _sorted(bundles) -> list[ViewBundle]:
    return sorted(bundles, key=lambda b: b.sample_id)


def _predict(model: FusionModel, vf: ViewFeatures, batch_size: int = 256) -> np.ndarray:
    out = []
    for start in range(0, len(vf), batch_size):
        logits, _ = model.forward(vf.take(np.arange(start, min(start + batch_size, len(vf)))))
        if not np.all(np.isfinite(logits)):
            raise NumericError("non-finite logits during evaluation")
        out.append(np.argmax(logits, axis=1))
    return np.concatenate(out)


def train(model: FusionModel, train_bundles, dev_bundles, config: TrainConfig,
          recorder: EpochRecorder | None = None) -> TrainResult:
    train_bundles = _sorted(train_bundles)
    if not train_bundles:
        raise ConfigError("training needs at least one train bundle")
    if config.image_size != model.config.image_size:
        raise ConfigError(f"train image_size {config.image_size} != model image_size {model.config.image_size}")
    recorder = recorder or EpochRecorder()

    train_vf = model.featurize(train_bundles)
    if train_vf.labels is None:
        raise ConfigError("every train bundle needs a label")
    dev_bundles = [b.originals_only() for b in _sorted(dev_bundles or [])]
    dev_vf = model.featurize(dev_bundles) if dev_bundles else None

    opt = AdamW(lr=config.learning_rate, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    result = TrainResult(model)
    n = len(train_vf)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = train_vf.take(order[start:start + config.batch_size])
            try:
                loss, grads = loss_and_gradients(model, batch)
                opt.step(model.params, grads)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}, batch {b}: {e}") from e
            total += loss * len(batch)

        train_acc = accuracy(train_vf.labels, _predict(model, train_vf))
        dev_acc = dev_f1 = None
        if dev_vf is not None:
            pred = _predict(model, dev_vf)
            dev_acc = accuracy(dev_vf.labels, pred)
            dev_f1 = weighted_f1(dev_vf.labels, pred)

        row = recorder.record(
            epoch=epoch,
            train_loss=float(total / n),
            train_accuracy=train_acc,
            dev_accuracy=dev_acc,
            dev_weighted_f1=dev_f1,
        )
        result.log.append(row)
        better = dev_f1 is not None and (result.best_dev_f1 is None or dev_f1 > result.best_dev_f1)
        if better or dev_vf is None:
            result.best_params = model.copy_params()
            result.best_epoch = epoch
            result.best_dev_f1 = dev_f1
    return result


def evaluate(model: FusionModel, bundles, batch_size: int = 256) -> EvalReport:
    """Metrics on the original pairs of labelled bundles; auxiliary views are dropped."""
    bundles = [b.originals_only() for b in bundles]
    if not bundles:
        raise ConfigError("evaluate needs at least one bundle")
    vf = model.featurize(bundles)
    if vf.labels is None:
        raise ConfigError("every evaluation bundle needs a label")
    return EvalReport.from_predictions(vf.labels, _predict(model, vf, batch_size))


@dataclass(frozen=True)
class ComparisonTable:
    """
    Fields
    ------
    variants : Column groups in first-seen order, e.g. ("original", "augmented").
    rows     : (model name, {variant: (accuracy, weighted_f1)}) per run.
    best     : (variant, metric) -> row index of the column maximum (first on ties).
    """
    variants: tuple[str, ...]
    rows:     tuple
    best:     dict

    def cell(self, model: str, variant: str) -> tuple[float, float] | None:
        for name, cells in self.rows:
            if name == model:
                return cells.get(variant)
        raise KeyError(model)

    def text(self) -> str:
        name_w = max([len("model")] + [len(name) for name, _ in self.rows])
        header = f"{'model':<{name_w}}"
        for v in self.variants:
            header += f"  {v + ' acc':>16}  {v + ' f1':>16}"
        lines = [header]
        for i, (name, cells) in enumerate(self.rows):
            line = f"{name:<{name_w}}"
            for v in self.variants:
                for m, value in zip(("accuracy", "weighted_f1"), cells.get(v, (None, None))):
                    text = "-" if value is None else f"{value:.4f}"
                    if value is not None and self.best.get((v, m)) == i:
                        text += "*"
                    line += f"  {text:>16}"
            lines.append(line)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "variants": list(self.variants),
            "rows": [
                {"model": name, **{v: {"accuracy": a, "weighted_f1": f} for v, (a, f) in cells.items()}}
                for name, cells in self.rows
            ],
            "best": {f"{v}.{m}": self.rows[i][0] for (v, m), i in self.best.items()},
        }


def comparison_report(runs) -> ComparisonTable:
    """runs: model name -> EvalReport, or model name -> {variant: EvalReport}.
    A bare EvalReport is filed under the "original" variant."""
    if not runs:
        raise ValueError("comparison_report needs at least one run")
    variants: list[str] = []
    rows = []
    for name, value in runs.items():
        per_variant = {"original": value} if isinstance(value, EvalReport) else dict(value)
        cells = {}
        for variant, report in per_variant.items():
            if variant not in variants:
                variants.append(variant)
            cells[variant] = (report.accuracy, report.weighted_f1)
        rows.append((name, cells))

    best = {}
    for v in variants:
        for k, m in enumerate(("accuracy", "weighted_f1")):
            candidates = [(i, cells[v][k]) for i, (_, cells) in enumerate(rows) if v in cells]
            if candidates:
                best[(v, m)] = max(candidates, key=lambda c: (c[1], -c[0]))[0]
    return ComparisonTable(tuple(variants), tuple(rows), best)
