"""
Text augmentation: back-translation, filtered paraphrasing and caption concatenation.

Functions
---------
run_chain(text, chain, translator) -> list[dict]        hop transcript
back_translate(text, chain, translator) -> str
paraphrase_candidates(text, n, backend, template, seed) -> list[ParaphraseCandidate]
filter_paraphrase(original, candidate, policy, embedder, label=None) -> Verdict
caption_augment(text, caption, separator=" ") -> str
augment_text_corpus(samples, method, backends, ...) -> list[AugmentationRecord]

Only train-split originals are augmented. Augmented inputs are rejected with reason
"provenance", which also prevents captioning a text twice.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from errors import BackendError, ConfigError, DatasetError
from dataset.schema import MultimodalSample, Provenance, Split
from augment.records import AugMethod, AugmentationRecord, ChildCounter, Verdict, sample_seed
from metrics.quality import cosine_similarity

DEFAULT_HOPS = (("en", "fr"), ("fr", "de"), ("de", "fr"), ("fr", "en"))
DEFAULT_TEMPLATE = (
    "Rewrite the following tweet so it keeps its meaning, hashtags and emojis "
    "but uses different wording:\n{text}"
)


@dataclass(frozen=True)
class BackTranslationChain:
    """
    Fields
    ------
    hops     : Ordered (source, target) language pairs.
    language : Corpus language; the chain must start and end there.
    """
    hops:     tuple[tuple[str, str], ...] = DEFAULT_HOPS
    language: str = "en"

    def __post_init__(self):
        hops = tuple(tuple(h) for h in self.hops)
        object.__setattr__(self, "hops", hops)
        if not hops:
            raise ConfigError("back-translation chain needs at least one hop")
        if any(len(h) != 2 for h in hops):
            raise ConfigError("every hop is a (source, target) pair")
        if hops[0][0] != self.language or hops[-1][1] != self.language:
            raise ConfigError(f"chain must start and end in {self.language!r}, got "
                              f"{hops[0][0]!r} ... {hops[-1][1]!r}")
        for k in range(len(hops) - 1):
            if hops[k][1] != hops[k + 1][0]:
                raise ConfigError(f"hop {k + 1} ends in {hops[k][1]!r} but hop {k + 2} starts in {hops[k + 1][0]!r}")

    def to_list(self) -> list[list[str]]:
        return [list(h) for h in self.hops]


@dataclass(frozen=True)
class ParaphraseFilterPolicy:
    """
    Acceptance filter for paraphrase candidates. Checks run in the order of REASONS;
    the first failing check is the rejection reason.

    Fields
    ------
    min_similarity   : Reject as "off_meaning" below this cosine similarity.
    max_similarity   : Reject as "not_diverse" above this cosine similarity.
    min_length_ratio : Lower bound of candidate/original whitespace-token ratio.
    max_length_ratio : Upper bound of the same ratio.
    label_checker    : Optional predicate (text, label) -> bool; None disables the check.
    """
    min_similarity:   float = 0.60
    max_similarity:   float = 0.98
    min_length_ratio: float = 0.5
    max_length_ratio: float = 2.0
    label_checker:    Callable | None = field(default=None, compare=False)

    REASONS = ("not_diverse", "off_meaning", "length", "label")

    def __post_init__(self):
        if not (0.0 <= self.min_similarity <= 1.0 and 0.0 <= self.max_similarity <= 1.0):
            raise ConfigError("similarity thresholds must lie in [0, 1]")
        if self.min_similarity > self.max_similarity:
            raise ConfigError(f"min_similarity {self.min_similarity} exceeds max_similarity {self.max_similarity}")
        if not 0.0 < self.min_length_ratio < self.max_length_ratio:
            raise ConfigError("length ratios must satisfy 0 < min_length_ratio < max_length_ratio")

    def to_dict(self) -> dict:
        return {
            "min_similarity":   self.min_similarity,
            "max_similarity":   self.max_similarity,
            "min_length_ratio": self.min_length_ratio,
            "max_length_ratio": self.max_length_ratio,
            "label_checker":    getattr(self.label_checker, "__name__", None) if self.label_checker else None,
        }


@dataclass(frozen=True)
class ParaphraseCandidate:
    index: int
    seed:  int
    text:  str | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_chain(text: str, chain: BackTranslationChain, translator) -> list[dict]:
    """Translate along every hop; returns the transcript [{source, target, text}, ...]."""
    transcript = []
    current = text
    for k, (source, target) in enumerate(chain.hops, start=1):
        try:
            current = translator.translate(current, source, target)
        except Exception as e:
            raise BackendError(f"back-translation hop {k} ({source}->{target}) failed: {e}") from e
        if not isinstance(current, str) or not current.strip():
            raise BackendError(f"back-translation hop {k} ({source}->{target}) returned empty text")
        transcript.append({"source": source, "target": target, "text": current})
    return transcript


def back_translate(text: str, chain: BackTranslationChain, translator) -> str:
    return run_chain(text, chain, translator)[-1]["text"]


def paraphrase_candidates(text: str, n: int, backend, template: str, seed: int) -> list[ParaphraseCandidate]:
    """n candidates, candidate i generated with seed + i. A failing call yields an error marker."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    out = []
    for i in range(n):
        try:
            para = backend.paraphrase(text, template, seed + i)
        except BackendError as e:
            out.append(ParaphraseCandidate(i, seed + i, error=str(e)))
            continue
        if not para or not para.strip():
            out.append(ParaphraseCandidate(i, seed + i, error="empty paraphrase"))
        else:
            out.append(ParaphraseCandidate(i, seed + i, text=para))
    return out


def length_ratio(original: str, candidate: str) -> float:
    return len(candidate.split()) / len(original.split())


def filter_paraphrase(original: str, candidate: str, policy: ParaphraseFilterPolicy,
                      embedder, label=None) -> Verdict:
    if not original.strip() or not candidate.strip():
        raise ValueError("filter_paraphrase needs non-empty texts")
    sim = cosine_similarity(embedder.embed(original), embedder.embed(candidate))
    if sim > policy.max_similarity:
        return Verdict.rejected("not_diverse")
    if sim < policy.min_similarity:
        return Verdict.rejected("off_meaning")
    ratio = length_ratio(original, candidate)
    if not policy.min_length_ratio <= ratio <= policy.max_length_ratio:
        return Verdict.rejected("length")
    if policy.label_checker is not None and not policy.label_checker(candidate, label):
        return Verdict.rejected("label")
    return Verdict.accepted()


def caption_augment(text: str, caption: str, separator: str = " ") -> str:
    if not caption or not caption.strip():
        raise ValueError("caption must be non-empty")
    return f"{text}{separator}{caption}"


@dataclass
class _Attempt:
    params:  dict
    verdict: Verdict
    text:    str | None = None


def _back_translation(sample, chain, backends) -> list[_Attempt]:
    transcript = run_chain(sample.tweet_text, chain, backends.translator)
    params = {"chain": chain.to_list(), "transcript": transcript}
    return [_Attempt(params, Verdict.accepted(), transcript[-1]["text"])]


def _paraphrase(sample, backends, policy, seed, n, template) -> list[_Attempt]:
    attempts = []
    s = sample_seed(seed, sample.sample_id)
    for cand in paraphrase_candidates(sample.tweet_text, n, backends.paraphraser, template, s):
        params = {"template": template, "seed": cand.seed, "candidate": cand.index, "policy": policy.to_dict()}
        if not cand.ok:
            attempts.append(_Attempt(params, Verdict.failed(cand.error)))
            continue
        try:
            verdict = filter_paraphrase(sample.tweet_text, cand.text, policy, backends.embedder, sample.label)
        except (ValueError, BackendError) as e:
            attempts.append(_Attempt(params, Verdict.failed(str(e))))
            continue
        attempts.append(_Attempt(params, verdict, cand.text if verdict.is_accepted else None))
    return attempts


def _caption(sample, backends, separator, image_source) -> list[_Attempt]:
    caption = backends.captioner.caption(image_source(sample))
    text = caption_augment(sample.tweet_text, caption, separator)
    return [_Attempt({"caption": caption, "separator": separator}, Verdict.accepted(), text)]


def _check_backends(method: AugMethod, backends, image_source):
    needed = {
        AugMethod.BACK_TRANSLATION: ("translator",),
        AugMethod.PARAPHRASE:       ("paraphraser", "embedder"),
        AugMethod.CAPTION_CONCAT:   ("captioner",),
    }.get(method)
    if needed is None:
        raise ConfigError(f"{method!r} is not a text augmentation method")
    missing = [n for n in needed if getattr(backends, n) is None]
    if missing:
        raise ConfigError(f"{method} needs backend(s): {', '.join(missing)}")
    if method is AugMethod.CAPTION_CONCAT and image_source is None:
        raise ConfigError("caption_concat needs an image source")


def augment_text_corpus(
    samples,
    method: AugMethod | str,
    backends,
    policy: ParaphraseFilterPolicy | None = None,
    seed: int = 0,
    *,
    chain: BackTranslationChain | None = None,
    n_candidates: int = 1,
    template: str = DEFAULT_TEMPLATE,
    separator: str = " ",
    image_source=None,
    existing_ids=(),
    workers: int = 1,
) -> list[AugmentationRecord]:
    """One record per attempted augmentation, in input order.

    Backend failures on one sample become failed records; the corpus run continues.
    """
    method = AugMethod(method)
    _check_backends(method, backends, image_source)
    policy = policy or ParaphraseFilterPolicy()
    chain = chain or BackTranslationChain()
    samples = list(samples)
    wrong_split = [s.sample_id for s in samples if s.split is not Split.TRAIN]
    if wrong_split:
        raise DatasetError(f"text augmentation applies to the train split only; got {wrong_split[0]!r}")

    def attempt(sample: MultimodalSample) -> list[_Attempt]:
        if sample.is_augmented:
            return [_Attempt({}, Verdict.rejected("provenance"))]
        try:
            if method is AugMethod.BACK_TRANSLATION:
                return _back_translation(sample, chain, backends)
            if method is AugMethod.PARAPHRASE:
                return _paraphrase(sample, backends, policy, seed, n_candidates, template)
            return _caption(sample, backends, separator, image_source)
        except (BackendError, ValueError) as e:
            return [_Attempt({}, Verdict.failed(str(e)))]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(attempt, samples))
    else:
        results = [attempt(s) for s in samples]

    ids = ChildCounter([*existing_ids, *(s.sample_id for s in samples)])
    records = []
    for sample, attempts in zip(samples, results):
        for a in attempts:
            new_sample = None
            if a.verdict.is_accepted:
                new_sample = MultimodalSample(
                    sample_id=ids.next(sample.sample_id),
                    tweet_text=a.text,
                    image_ref=sample.image_ref,
                    label=sample.label,
                    split=sample.split,
                    provenance=Provenance.AUGMENTED,
                    parent_id=sample.sample_id,
                )
            records.append(AugmentationRecord(sample.sample_id, method, a.params, a.verdict, new_sample))
    return records
