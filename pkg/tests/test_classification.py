import numpy as np
import pytest

from dataset.schema import N_CLASSES
from metrics.classification import (
    ClassScores,
    EvalReport,
    accuracy,
    confusion_matrix,
    format_eval_report,
    macro_f1,
    per_class_scores,
    weighted_f1,
)


def _random_labels(rng):
    n = int(rng.integers(1, 60))
    # narrow label ranges make absent and never-predicted classes common
    hi = int(rng.integers(1, N_CLASSES + 1))
    return rng.integers(0, hi, n), rng.integers(0, N_CLASSES, n)


def test_matches_sklearn_on_random_vectors():
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(1000):
        t, p = _random_labels(rng)
        assert abs(accuracy(t, p) - metrics.accuracy_score(t, p)) < 1e-12
        expected = metrics.f1_score(t, p, labels=list(range(N_CLASSES)), average="weighted", zero_division=0)
        assert abs(weighted_f1(t, p) - expected) < 1e-12
        expected = metrics.f1_score(t, p, labels=sorted(set(t.tolist())), average="macro", zero_division=0)
        assert abs(macro_f1(t, p) - expected) < 1e-12
        assert np.array_equal(confusion_matrix(t, p),
                              metrics.confusion_matrix(t, p, labels=list(range(N_CLASSES))))


def test_report_is_consistent_with_confusion():
    rng = np.random.default_rng(1)
    for _ in range(100):
        t, p = _random_labels(rng)
        r = EvalReport.from_predictions(t, p)
        assert r.n == len(t)
        assert abs(r.accuracy - np.trace(r.confusion) / r.n) < 1e-12
        assert [s.support for s in r.per_class] == np.bincount(t, minlength=N_CLASSES).tolist()


def test_perfect_and_worst_predictions():
    t = [0, 1, 2, 3, 4, 4]
    assert weighted_f1(t, t) == 1.0 and accuracy(t, t) == 1.0
    assert weighted_f1(t, [1, 2, 3, 4, 0, 0]) == 0.0


def test_never_predicted_class_scores_zero():
    scores = per_class_scores(confusion_matrix([0, 0, 1], [0, 0, 0]))
    assert scores[1] == ClassScores(0.0, 0.0, 0.0, 1)
    assert scores[0].precision == pytest.approx(2 / 3)


@pytest.mark.parametrize("t, p", [([], []), ([0, 1], [0]), ([5], [0]), ([-1], [0])])
def test_invalid_inputs(t, p):
    with pytest.raises(ValueError):
        confusion_matrix(t, p)


def test_report_dict_round_trip_and_validation():
    r = EvalReport.from_predictions([0, 1, 1, 3], [0, 1, 2, 3])
    back = EvalReport.from_dict(r.to_dict())
    assert back == r
    assert np.array_equal(back.confusion, r.confusion)
    with pytest.raises(ValueError):
        EvalReport(1.0, 1.0, r.per_class, np.zeros((5, 5)))


def test_format_eval_report():
    text = format_eval_report(EvalReport.from_predictions([0, 1], [0, 1]), "test split")
    lines = text.splitlines()
    assert lines[0] == "test split"
    assert lines[-2].split() == ["accuracy", "1.0000"]
    assert lines[-1].split() == ["weighted", "f1", "1.0000"]
