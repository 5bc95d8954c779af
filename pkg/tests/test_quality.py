import itertools
import math

import numpy as np
import pytest

from errors import BackendError
from backends.stubs import StubEmbedder, StubLm
from metrics.quality import (
    QualityReport,
    corpus_quality,
    cosine_similarity,
    format_quality_table,
    lcs_length,
    perplexity,
    perplexity_from_nll,
    reference_perplexity,
    rouge_l,
    rouge_tokenize,
)


def _dp_lcs(a, b) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def _is_subsequence(sub, seq) -> bool:
    it = iter(seq)
    return all(tok in it for tok in sub)


def _brute_lcs(a, b) -> int:
    for n in range(min(len(a), len(b)), 0, -1):
        if any(_is_subsequence(c, b) for c in itertools.combinations(a, n)):
            return n
    return 0


def _oracle_f1(a, b, lcs) -> float:
    if lcs == 0:
        return 0.0
    p, r = lcs / len(b), lcs / len(a)
    return 2 * p * r / (p + r)


# ------------------------------------------------------------------ ROUGE-L

def test_rouge_l_matches_brute_force_on_short_sequences():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = [f"w{t}" for t in rng.integers(0, 4, rng.integers(1, 9))]
        b = [f"w{t}" for t in rng.integers(0, 4, rng.integers(1, 9))]
        lcs = _brute_lcs(a, b)
        assert lcs_length(a, b) == lcs
        assert rouge_l(a, b).f1 == _oracle_f1(a, b, lcs)


def test_rouge_l_matches_dp_on_long_sequences():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a = [f"w{t}" for t in rng.integers(0, 20, rng.integers(1, 201))]
        b = [f"w{t}" for t in rng.integers(0, 20, rng.integers(1, 201))]
        lcs = _dp_lcs(a, b)
        assert lcs_length(a, b) == lcs
        assert abs(rouge_l(a, b).f1 - _oracle_f1(a, b, lcs)) < 1e-12


def test_rouge_l_precision_recall():
    score = rouge_l("police rescued two people", "two people rescued")
    # LCS = "two people" or "rescued ..." -> length 2
    assert score.precision == pytest.approx(2 / 3)
    assert score.recall == pytest.approx(2 / 4)
    assert rouge_l("a b c", "a b c") == (1.0, 1.0, 1.0)
    assert rouge_l("a b", "c d").f1 == 0.0


def test_rouge_l_swapping_arguments_swaps_precision_and_recall():
    rng = np.random.default_rng(2)
    for _ in range(500):
        a = [f"w{t}" for t in rng.integers(0, 6, rng.integers(1, 30))]
        b = [f"w{t}" for t in rng.integers(0, 6, rng.integers(1, 30))]
        ab, ba = rouge_l(a, b), rouge_l(b, a)
        assert (ab.precision, ab.recall) == (ba.recall, ba.precision)
        assert ab.f1 == ba.f1


def test_rouge_l_rejects_empty():
    with pytest.raises(ValueError):
        rouge_l("!!!", "words")


def test_rouge_tokenize_keeps_hashtags_and_mentions():
    assert rouge_tokenize("#Flood, @RedCross Help!! now...") == ["#flood", "@redcross", "help", "now"]


# ------------------------------------------------------------------ similarity and perplexity

def test_cosine_similarity_bounds_and_errors():
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 2], [1, 2]) == 1.0
    assert cosine_similarity([1, 2], [-1, -2]) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(ValueError):
        cosine_similarity([1, 0], [1, 0, 0])


def test_cosine_similarity_ignores_positive_scaling():
    rng = np.random.default_rng(3)
    for _ in range(500):
        u, v = rng.normal(size=(2, 16))
        alpha, beta = rng.uniform(1e-3, 1e3, size=2)
        assert abs(cosine_similarity(alpha * u, beta * v) - cosine_similarity(u, v)) < 1e-12
        assert abs(cosine_similarity(alpha * u, u) - 1.0) < 1e-12


@pytest.mark.parametrize("v", [2, 50, 1000])
def test_uniform_scorer_perplexity_is_vocab_size(v):
    lm = StubLm(v)
    for text in ("a", "flood waters rising near the bridge", " ".join(["x"] * 300)):
        assert abs(perplexity(text, lm) - v) < 1e-9


def test_perplexity_does_not_depend_on_token_order():
    rng = np.random.default_rng(4)
    for _ in range(200):
        nll = rng.exponential(2.0, size=int(rng.integers(1, 60)))
        assert perplexity_from_nll(rng.permutation(nll)) == perplexity_from_nll(nll)


def test_perplexity_errors():
    with pytest.raises(ValueError):
        perplexity("   ", StubLm())
    with pytest.raises(BackendError):
        perplexity_from_nll([1.0, math.inf])

    class Short(StubLm):
        def score(self, tokens):
            return np.zeros(1)
    with pytest.raises(BackendError):
        perplexity("two tokens", Short())


# ------------------------------------------------------------------ corpus reports

def test_identity_corpus_reads_one_one_v():
    pairs = [("roads flooded #harvey", "roads flooded #harvey"), ("need water", "need water")]
    report = corpus_quality(pairs, "back_translation", StubEmbedder(), StubLm(50))
    assert report.mean_semantic_similarity == 1.0
    assert report.mean_rouge_l == 1.0
    assert abs(report.mean_perplexity - 50) < 1e-9
    assert report.n == 2
    assert report.perplexity_basis == "augmented"


def test_report_means_match_recomputation():
    pairs = [("the bridge collapsed", "bridge has collapsed"), ("donate blood today", "give blood"),
             ("power lines down", "lines of power are down now")]
    emb, lm = StubEmbedder(dim=8, seed=3), StubLm(20)
    report = corpus_quality(pairs, "paraphrase", emb, lm)
    sims = [cosine_similarity(emb.embed(a), emb.embed(b)) for a, b in pairs]
    rouges = [rouge_l(a, b).f1 for a, b in pairs]
    assert report.mean_semantic_similarity == pytest.approx(sum(sims) / 3)
    assert report.mean_rouge_l == pytest.approx(sum(rouges) / 3)
    assert report.mean_perplexity == pytest.approx(20.0)


def test_parallel_corpus_quality_matches_sequential():
    pairs = [(f"text {i} here", f"text {i} there") for i in range(20)]
    a = corpus_quality(pairs, "m", StubEmbedder(), StubLm(), workers=1)
    b = corpus_quality(pairs, "m", StubEmbedder(), StubLm(), workers=4)
    assert a == b


def test_empty_pairs_are_an_error():
    with pytest.raises(ValueError, match="no"):
        corpus_quality([], "paraphrase", StubEmbedder(), StubLm())


def test_failing_pair_is_named():
    with pytest.raises(ValueError, match="pair 1"):
        corpus_quality([("a", "b"), ("c", "...")], "m", StubEmbedder(), StubLm())


def test_reference_perplexity():
    assert reference_perplexity(["a b", "c"], StubLm(7)) == pytest.approx(7.0)


def test_quality_table_layout():
    reports = [QualityReport("back_translation", 0.9, 0.7, 60.0, 10), QualityReport("paraphrase", 0.8, 0.5, 80.0, 9)]
    lines = format_quality_table(reports, reference=110.15).splitlines()
    assert lines[0].split() == ["Method", "Semantic", "Similarity", "ROUGE-L", "Perplexity", "N"]
    assert lines[2].split() == ["back_translation", "0.9000", "0.7000", "60.00", "10"]
    assert lines[-1].split() == ["original", "-", "-", "110.15", "-"]
    assert len({len(line) for line in lines}) == 1


def test_quality_report_validation_and_round_trip():
    r = QualityReport("paraphrase", 0.5, 0.25, 12.0, 4)
    assert QualityReport.from_dict(r.to_dict()) == r
    with pytest.raises(ValueError):
        QualityReport("x", 0.5, 1.5, 12.0, 4)
    with pytest.raises(ValueError):
        QualityReport("x", 0.5, 0.5, 12.0, 0)
