"""
Augmentation-quality metrics: semantic similarity, ROUGE-L and perplexity.

Functions
---------
cosine_similarity(u, v) -> float
rouge_tokenize(text) -> list[str]
lcs_length(a, b) -> int
rouge_l(reference, candidate) -> RougeScore
perplexity(text, scorer, tokenizer=None) -> float
corpus_quality(pairs, method, embedder, scorer) -> QualityReport
reference_perplexity(texts, scorer) -> float
format_quality_table(reports, reference=None) -> str

ROUGE-L is reported as F1 with beta = 1. Perplexity is exp of the mean per-token natural-log
NLL as returned by the scorer backend; corpus means use math.fsum so the result does not
depend on summation order.
"""

import math
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from errors import BackendError

PERPLEXITY_BASIS = "augmented"

_KEEP_PREFIXES = ("#", "@")


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    if np.array_equal(u, v):
        return 1.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _strip_punctuation(s: str) -> str:
    return "".join(ch for ch in s if not unicodedata.category(ch).startswith("P"))


def rouge_tokenize(text: str) -> list[str]:
    """Lowercase, whitespace split, punctuation removed; a leading '#' or '@' is kept."""
    tokens = []
    for raw in text.lower().split():
        prefix = raw[0] if raw.startswith(_KEEP_PREFIXES) else ""
        body = _strip_punctuation(raw[len(prefix):])
        if body:
            tokens.append(prefix + body)
    return tokens


def lcs_length(a, b) -> int:
    """Longest common subsequence length (bit-parallel over b, O(len(a) * len(b) / wordsize))."""
    m = len(b)
    if not a or not m:
        return 0
    match: dict = {}
    for j, tok in enumerate(b):
        match[tok] = match.get(tok, 0) | (1 << j)
    full = (1 << m) - 1
    v = full
    for tok in a:
        u = v & match.get(tok, 0)
        v = ((v + u) | (v - u)) & full
    return m - v.bit_count()


class RougeScore(NamedTuple):
    precision: float
    recall:    float
    f1:        float


def rouge_l(reference, candidate) -> RougeScore:
    """ROUGE-L over token sequences. Strings are tokenized with rouge_tokenize first."""
    if isinstance(reference, str):
        reference = rouge_tokenize(reference)
    if isinstance(candidate, str):
        candidate = rouge_tokenize(candidate)
    if not reference or not candidate:
        raise ValueError("ROUGE-L needs non-empty token sequences")
    lcs = lcs_length(reference, candidate)
    if lcs == 0:
        return RougeScore(0.0, 0.0, 0.0)
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return RougeScore(p, r, 2.0 * p * r / (p + r))


def perplexity_from_nll(nll) -> float:
    nll = [float(x) for x in nll]
    if not nll:
        raise ValueError("perplexity needs at least one token")
    if not all(math.isfinite(x) for x in nll):
        raise BackendError("scorer returned non-finite NLL values")
    return math.exp(math.fsum(nll) / len(nll))


def perplexity(text: str, scorer, tokenizer=None) -> float:
    tokens = (tokenizer or scorer.tokenize)(text)
    if not tokens:
        raise ValueError("perplexity needs at least one token")
    nll = scorer.score(tokens)
    if len(nll) != len(tokens):
        raise BackendError(f"scorer returned {len(nll)} values for {len(tokens)} tokens")
    return perplexity_from_nll(nll)


@dataclass(frozen=True)
class QualityReport:
    """
    Per-method averages over (original, augmented) text pairs.

    Fields
    ------
    method                   : Augmentation method tag.
    mean_semantic_similarity : Mean cosine similarity of sentence embeddings, in [-1, 1].
    mean_rouge_l             : Mean ROUGE-L F1, in [0, 1].
    mean_perplexity          : Mean perplexity of the augmented texts, > 0.
    n                        : Number of pairs.
    perplexity_basis         : Which side of each pair perplexity was computed on.
    """
    method:                   str
    mean_semantic_similarity: float
    mean_rouge_l:             float
    mean_perplexity:          float
    n:                        int
    perplexity_basis:         str = PERPLEXITY_BASIS

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("quality report needs n >= 1")
        if not -1.0 <= self.mean_semantic_similarity <= 1.0:
            raise ValueError(f"mean similarity {self.mean_semantic_similarity} outside [-1, 1]")
        if not 0.0 <= self.mean_rouge_l <= 1.0:
            raise ValueError(f"mean ROUGE-L {self.mean_rouge_l} outside [0, 1]")
        if not self.mean_perplexity > 0.0:
            raise ValueError(f"mean perplexity {self.mean_perplexity} must be positive")

    def to_dict(self) -> dict:
        return {
            "method":                   self.method,
            "mean_semantic_similarity": self.mean_semantic_similarity,
            "mean_rouge_l":             self.mean_rouge_l,
            "mean_perplexity":          self.mean_perplexity,
            "n":                        self.n,
            "perplexity_basis":         self.perplexity_basis,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "QualityReport":
        return cls(**raw)


@dataclass(frozen=True)
class PairMetrics:
    similarity: float
    rouge_l:    float
    perplexity: float


def pair_metrics(original: str, augmented: str, embedder, scorer, tokenizer=None) -> PairMetrics:
    return PairMetrics(
        similarity=cosine_similarity(embedder.embed(original), embedder.embed(augmented)),
        rouge_l=rouge_l(original, augmented).f1,
        perplexity=perplexity(augmented, scorer, tokenizer),
    )


def _with_index(i: int, e: Exception) -> Exception:
    cls = BackendError if isinstance(e, BackendError) else ValueError
    return cls(f"pair {i}: {e}")


def corpus_quality(pairs, method: str, embedder, scorer, tokenizer=None, workers: int = 1) -> QualityReport:
    """Mean similarity, ROUGE-L F1 and augmented-text perplexity over (original, augmented) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError(f"no (original, augmented) pairs for method {method!r}")

    def one(indexed):
        i, (original, augmented) = indexed
        try:
            return pair_metrics(original, augmented, embedder, scorer, tokenizer)
        except (ValueError, BackendError) as e:
            raise _with_index(i, e) from e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            metrics = list(pool.map(one, enumerate(pairs)))
    else:
        metrics = [one(p) for p in enumerate(pairs)]

    n = len(metrics)
    return QualityReport(
        method=str(method),
        mean_semantic_similarity=math.fsum(m.similarity for m in metrics) / n,
        mean_rouge_l=math.fsum(m.rouge_l for m in metrics) / n,
        mean_perplexity=math.fsum(m.perplexity for m in metrics) / n,
        n=n,
    )


def reference_perplexity(texts, scorer, tokenizer=None) -> float:
    """Mean perplexity of unaugmented texts, the baseline row of the quality table."""
    values = [perplexity(t, scorer, tokenizer) for t in texts]
    if not values:
        raise ValueError("no texts for reference perplexity")
    return math.fsum(values) / len(values)


def format_quality_table(reports, reference: float | None = None) -> str:
    """Aligned text table: one row per method, plus an 'original' row when reference is given."""
    header = ("Method", "Semantic Similarity", "ROUGE-L", "Perplexity", "N")
    rows = [(r.method, f"{r.mean_semantic_similarity:.4f}", f"{r.mean_rouge_l:.4f}",
             f"{r.mean_perplexity:.2f}", str(r.n)) for r in reports]
    if reference is not None:
        rows.append(("original", "-", "-", f"{reference:.2f}", "-"))
    widths = [max([len(header[c])] + [len(row[c]) for row in rows]) for c in range(len(header))]
    lines = ["  ".join(h.ljust(w) if c == 0 else h.rjust(w) for c, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(w) if c == 0 else v.rjust(w) for c, (v, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"
