import numpy as np
import pytest

from errors import BackendError, ConfigError, DatasetError
from augment.records import (
    AugMethod, ChildCounter, Verdict, VerdictStatus, accepted_samples, read_records, sample_seed,
    verdict_counts, write_records,
)
from augment.text import (
    BackTranslationChain,
    ParaphraseFilterPolicy,
    augment_text_corpus,
    back_translate,
    caption_augment,
    filter_paraphrase,
    paraphrase_candidates,
    run_chain,
)
from backends.base import Backends
from backends.stubs import StubCaptioner, StubEmbedder, StubParaphraser, StubTranslator
from dataset.schema import MultimodalSample, Provenance, Split
from dataset.synthetic import SyntheticImages


@pytest.fixture
def train(tiny_samples):
    return [s for s in tiny_samples if s.split is Split.TRAIN]


# ------------------------------------------------------------------ back-translation

def test_default_chain_is_en_fr_de_fr_en():
    assert BackTranslationChain().to_list() == [["en", "fr"], ["fr", "de"], ["de", "fr"], ["fr", "en"]]


@pytest.mark.parametrize("hops", [
    (("en", "fr"), ("fr", "de")),               # does not return to en
    (("en", "fr"), ("de", "en")),               # disconnected
    (),
])
def test_invalid_chain_is_config_error(hops):
    with pytest.raises(ConfigError):
        BackTranslationChain(hops)


def test_transcript_records_every_hop():
    t = StubTranslator("dictionary", {("en", "fr"): {"flood": "inondation"},
                                      ("fr", "de"): {"inondation": "hochwasser"},
                                      ("de", "fr"): {"hochwasser": "crue"},
                                      ("fr", "en"): {"crue": "flooding"}})
    transcript = run_chain("flood warning", BackTranslationChain(), t)
    assert [h["text"] for h in transcript] == [
        "inondation warning", "hochwasser warning", "crue warning", "flooding warning"]
    assert back_translate("flood warning", BackTranslationChain(), t) == "flooding warning"


def test_identity_chain_returns_input():
    assert back_translate("roads closed #flood", BackTranslationChain(), StubTranslator()) == "roads closed #flood"


class _BrokenTranslator(StubTranslator):
    def translate(self, text, source, target):
        if target == "de":
            raise RuntimeError("quota exceeded")
        return text


def test_failing_hop_is_named():
    with pytest.raises(BackendError, match="hop 2"):
        run_chain("x", BackTranslationChain(), _BrokenTranslator())


_VOCAB = [f"w{i}" for i in range(40)] + ["#flood", "@redcross", "help", "roads", "closed", "🙏"]


def _random_texts(n, seed=0):
    rng = np.random.default_rng(seed)
    return [" ".join(rng.choice(_VOCAB, size=int(rng.integers(1, 16)))) for _ in range(n)]


def test_chain_identities_hold_for_random_texts():
    chain = BackTranslationChain()
    identity, reverse = StubTranslator("identity"), StubTranslator("word_reverse")
    for text in _random_texts(1000):
        transcript = run_chain(text, chain, identity)
        assert [(h["source"], h["target"]) for h in transcript] == list(chain.hops)
        assert transcript[-1]["text"] == text
        assert back_translate(text, chain, reverse) == text


def test_dictionary_round_trip_with_inverse_maps():
    forward = {w: f"{w}_fr" for w in _VOCAB}
    t = StubTranslator("dictionary", {("en", "fr"): forward, ("fr", "en"): {v: k for k, v in forward.items()}})
    chain = BackTranslationChain((("en", "fr"), ("fr", "en")))
    for text in _random_texts(1000, seed=1):
        transcript = run_chain(text, chain, t)
        assert transcript[0]["text"] == " ".join(forward[w] for w in text.split())
        assert transcript[-1]["text"] == text


# ------------------------------------------------------------------ paraphrase filter

_TABLE = StubEmbedder(dim=2, table={"a": [1.0, 0.0], "b": [0.0, 1.0]})


@pytest.mark.parametrize("candidate, reason", [
    ("a a", "not_diverse"),          # cosine 1
    ("b b", "off_meaning"),          # cosine 0
    ("a a a a a a", "not_diverse"),  # also too long; the similarity check comes first
])
def test_filter_rejection_reasons(candidate, reason):
    assert filter_paraphrase("a a", candidate, ParaphraseFilterPolicy(), _TABLE) == Verdict.rejected(reason)


def test_filter_length_check():
    policy = ParaphraseFilterPolicy(max_similarity=0.99)
    assert filter_paraphrase("a a", "a a a a a b", policy, _TABLE) == Verdict.rejected("length")


def test_filter_accepts_in_band_candidate():
    assert filter_paraphrase("a a", "a b", ParaphraseFilterPolicy(), _TABLE).is_accepted


def test_filter_label_checker():
    policy = ParaphraseFilterPolicy(label_checker=lambda text, label: False)
    assert filter_paraphrase("a a", "a b", policy, _TABLE) == Verdict.rejected("label")


def test_policy_rejects_inverted_band():
    with pytest.raises(ConfigError):
        ParaphraseFilterPolicy(min_similarity=0.9, max_similarity=0.5)


def test_candidates_use_consecutive_seeds_and_mark_failures():
    cands = paraphrase_candidates("help", 3, StubParaphraser(fail_seeds=[11]), "{text}", 10)
    assert [c.seed for c in cands] == [10, 11, 12]
    assert [c.ok for c in cands] == [True, False, True]
    assert cands[2].text == "help #para12"
    with pytest.raises(ValueError):
        paraphrase_candidates("help", 0, StubParaphraser(), "{text}", 0)


# ------------------------------------------------------------------ captions

def test_caption_augment_concatenates():
    assert caption_augment("roads closed", "a flooded street") == "roads closed a flooded street"
    assert caption_augment("roads closed", "a flooded street", " | ") == "roads closed | a flooded street"
    with pytest.raises(ValueError):
        caption_augment("roads closed", " ")


def test_caption_keeps_the_tweet_as_prefix():
    tweet = "#smaili community steps up to serve #Harvey victims."
    caption = "A woman standing at a table with boxes of food."
    assert caption_augment(tweet, caption) == (
        "#smaili community steps up to serve #Harvey victims. A woman standing at a table with boxes of food.")
    separators = [" ", " | ", ". ", "\n"]
    for i, (text, cap) in enumerate(zip(_random_texts(1000, seed=2), _random_texts(1000, seed=3))):
        sep = separators[i % len(separators)]
        out = caption_augment(text, cap, sep)
        assert out.startswith(text)
        assert out[len(text):] == sep + cap


# ------------------------------------------------------------------ corpus runs

def test_identity_back_translation_doubles_train(train):
    records = augment_text_corpus(train, AugMethod.BACK_TRANSLATION, Backends(translator=StubTranslator()))
    new = accepted_samples(records)
    assert len(new) == len(train)
    for parent, child in zip(train, new):
        assert child.sample_id == f"{parent.sample_id}#aug1"
        assert child.tweet_text == parent.tweet_text
        assert (child.label, child.split, child.image_ref) == (parent.label, parent.split, parent.image_ref)
        assert child.provenance is Provenance.AUGMENTED and child.parent_id == parent.sample_id


def test_child_ids_continue_after_existing(train):
    existing = [f"{train[0].sample_id}#aug1", f"{train[0].sample_id}#aug2"]
    records = augment_text_corpus(train[:1], "back_translation", Backends(translator=StubTranslator()),
                                  existing_ids=existing)
    assert records[0].new_sample.sample_id == f"{train[0].sample_id}#aug3"


def test_child_counter():
    ids = ChildCounter(["p#aug4", "q"])
    assert ids.next("p") == "p#aug5"
    assert ids.next("q") == "q#aug1"
    assert ids.next("q") == "q#aug2"


def test_non_train_input_is_rejected(tiny_samples):
    dev = [s for s in tiny_samples if s.split is Split.DEV]
    with pytest.raises(DatasetError):
        augment_text_corpus(dev, "back_translation", Backends(translator=StubTranslator()))


def test_augmented_input_is_rejected_with_provenance(train):
    child = MultimodalSample("x#aug1", "text", "x.png", train[0].label, Split.TRAIN,
                             Provenance.AUGMENTED, "x")
    records = augment_text_corpus([child], "back_translation", Backends(translator=StubTranslator()))
    assert records[0].verdict == Verdict.rejected("provenance")
    assert records[0].new_sample is None


def test_missing_backend_is_config_error(train):
    with pytest.raises(ConfigError, match="paraphraser"):
        augment_text_corpus(train, "paraphrase", Backends(embedder=StubEmbedder()))
    with pytest.raises(ConfigError, match="image source"):
        augment_text_corpus(train, "caption_concat", Backends(captioner=StubCaptioner()))


def test_paraphrase_failure_becomes_failed_record(train):
    bad = sample_seed(3, train[1].sample_id)
    backends = Backends(paraphraser=StubParaphraser(fail_seeds=[bad]), embedder=StubEmbedder())
    records = augment_text_corpus(train[:3], "paraphrase", backends, seed=3)
    assert len(records) == 3
    assert records[1].verdict.status is VerdictStatus.FAILED
    assert records[1].params["seed"] == bad
    assert verdict_counts(records)["failed"] == 1


def test_paraphrase_n_candidates_give_one_record_each(train):
    backends = Backends(paraphraser=StubParaphraser(), embedder=StubEmbedder())
    policy = ParaphraseFilterPolicy(min_similarity=0.0, max_similarity=1.0, max_length_ratio=3.0)
    records = augment_text_corpus(train[:2], "paraphrase", backends, policy, n_candidates=3)
    assert len(records) == 6
    assert [r.params["candidate"] for r in records] == [0, 1, 2, 0, 1, 2]
    assert [s.sample_id for s in accepted_samples(records)][:3] == [
        f"{train[0].sample_id}#aug{k}" for k in (1, 2, 3)]


def test_caption_concat_appends_caption(tiny_spec, train):
    backends = Backends(captioner=StubCaptioner("a flooded street"))
    records = augment_text_corpus(train[:2], "caption_concat", backends,
                                  separator=" | ", image_source=SyntheticImages(tiny_spec))
    assert records[0].new_sample.tweet_text == f"{train[0].tweet_text} | a flooded street"
    assert records[0].params == {"caption": "a flooded street", "separator": " | "}


def test_parallel_run_matches_sequential(train):
    backends = Backends(paraphraser=StubParaphraser("word_shuffle"), embedder=StubEmbedder())
    one = augment_text_corpus(train, "paraphrase", backends, seed=5, n_candidates=2)
    many = augment_text_corpus(train, "paraphrase", backends, seed=5, n_candidates=2, workers=4)
    assert [r.to_dict() for r in one] == [r.to_dict() for r in many]


def test_records_file_round_trip(train, tmp_path):
    records = augment_text_corpus(train, "back_translation", Backends(translator=StubTranslator()))
    path = write_records(tmp_path / "records.jsonl", records)
    assert [r.to_dict() for r in read_records(path)] == [r.to_dict() for r in records]


def test_malformed_records_file(tmp_path):
    path = tmp_path / "records.jsonl"
    path.write_text('{"parent_id": "a"}\n', encoding="utf-8")
    with pytest.raises(DatasetError, match="malformed"):
        read_records(path)
