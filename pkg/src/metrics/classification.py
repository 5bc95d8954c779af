"""
Classification metrics over the five humanitarian classes.

Labels are class indices 0..4 in LABEL_ORDER. Per-class F1 is 0 when precision + recall is 0;
precision of a class that is never predicted is 0. Classes absent from y_true carry zero
weight in the weighted F1.
"""

from dataclasses import dataclass, field

import numpy as np

from dataset.schema import LABEL_ORDER, N_CLASSES


def _check(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=int).reshape(-1)
    p = np.asarray(y_pred, dtype=int).reshape(-1)
    if t.size != p.size:
        raise ValueError(f"length mismatch: {t.size} labels vs {p.size} predictions")
    if t.size == 0:
        raise ValueError("metrics need at least one label")
    for arr in (t, p):
        if arr.min() < 0 or arr.max() >= N_CLASSES:
            raise ValueError(f"labels must lie in 0..{N_CLASSES - 1}")
    return t, p


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """C[i, j] = count of true class i predicted as j."""
    t, p = _check(y_true, y_pred)
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def accuracy(y_true, y_pred) -> float:
    t, p = _check(y_true, y_pred)
    return int((t == p).sum()) / t.size


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall:    float
    f1:        float
    support:   int


def per_class_scores(cm: np.ndarray) -> list[ClassScores]:
    cm = np.asarray(cm)
    out = []
    for c in range(N_CLASSES):
        tp = int(cm[c, c])
        predicted = int(cm[:, c].sum())
        support = int(cm[c, :].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out.append(ClassScores(precision, recall, f1, support))
    return out


def weighted_f1_from_confusion(cm: np.ndarray) -> float:
    scores = per_class_scores(cm)
    n = sum(s.support for s in scores)
    return sum(s.support * s.f1 for s in scores) / n


def weighted_f1(y_true, y_pred) -> float:
    return weighted_f1_from_confusion(confusion_matrix(y_true, y_pred))


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean over classes present in y_true."""
    scores = [s for s in per_class_scores(confusion_matrix(y_true, y_pred)) if s.support]
    return sum(s.f1 for s in scores) / len(scores)


@dataclass(frozen=True)
class EvalReport:
    """
    Fields
    ------
    accuracy    : trace(confusion) / N.
    weighted_f1 : Support-weighted mean of per-class F1.
    per_class   : ClassScores per class, in LABEL_ORDER.
    confusion   : 5x5 counts, rows = true class, columns = predicted class.
    """
    accuracy:    float
    weighted_f1: float
    per_class:   tuple[ClassScores, ...]
    confusion:   np.ndarray = field(compare=False)

    def __post_init__(self):
        cm = np.asarray(self.confusion, dtype=np.int64)
        object.__setattr__(self, "confusion", cm)
        object.__setattr__(self, "per_class", tuple(self.per_class))
        if cm.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"confusion must be {N_CLASSES}x{N_CLASSES}")
        if [s.support for s in self.per_class] != cm.sum(axis=1).tolist():
            raise ValueError("per-class supports disagree with confusion row sums")
        if not (0.0 <= self.accuracy <= 1.0 and 0.0 <= self.weighted_f1 <= 1.0):
            raise ValueError("accuracy and weighted_f1 must lie in [0, 1]")

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "EvalReport":
        cm = confusion_matrix(y_true, y_pred)
        report = cls(
            accuracy=accuracy(y_true, y_pred),
            weighted_f1=weighted_f1_from_confusion(cm),
            per_class=tuple(per_class_scores(cm)),
            confusion=cm,
        )
        if abs(report.accuracy - np.trace(cm) / cm.sum()) > 1e-12:
            raise ArithmeticError("accuracy disagrees with the confusion matrix")
        return report

    def to_dict(self) -> dict:
        return {
            "accuracy":    self.accuracy,
            "weighted_f1": self.weighted_f1,
            "per_class": {
                label.value: {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for label, s in zip(LABEL_ORDER, self.per_class)
            },
            "confusion": self.confusion.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalReport":
        per = raw["per_class"]
        return cls(
            accuracy=raw["accuracy"],
            weighted_f1=raw["weighted_f1"],
            per_class=tuple(ClassScores(**per[label.value]) for label in LABEL_ORDER),
            confusion=np.asarray(raw["confusion"], dtype=np.int64),
        )


def format_eval_report(report: EvalReport, title: str = "") -> str:
    name_w = max(len(lb.value) for lb in LABEL_ORDER)
    lines = [title] if title else []
    lines.append(f"{'class':<{name_w}}  precision  recall  f1      support")
    for label, s in zip(LABEL_ORDER, report.per_class):
        lines.append(f"{label.value:<{name_w}}  {s.precision:9.4f}  {s.recall:6.4f}  {s.f1:6.4f}  {s.support:7d}")
    lines.append(f"{'accuracy':<{name_w}}  {report.accuracy:.4f}")
    lines.append(f"{'weighted f1':<{name_w}}  {report.weighted_f1:.4f}")
    return "\n".join(lines)
