"""
Deterministic stub backends for offline runs and tests.

All stubs are REENTRANT and hold no mutable state after construction; repeated calls with
the same arguments agree bit-exactly.
"""

import math
import zlib
from collections.abc import Mapping

import numpy as np

from errors import BackendError
from dataset.images import ImageTensor, from_uint8, to_uint8
from backends.base import ConcurrencyClass

_CHANNEL_NAMES = ("red", "green", "blue")


def _words(text: str) -> list[str]:
    return text.split()


class StubTranslator:
    """
    Modes
    -----
    identity     : returns the input verbatim for every language pair.
    word_reverse : reverses the whitespace token order.
    dictionary   : maps tokens through maps[(source, target)]; unmapped tokens pass through.
    """
    concurrency = ConcurrencyClass.REENTRANT
    MODES = ("identity", "word_reverse", "dictionary")

    def __init__(self, mode: str = "identity", maps: Mapping[tuple[str, str], Mapping[str, str]] | None = None):
        if mode not in self.MODES:
            raise ValueError(f"unknown translator mode {mode!r}")
        self.mode = mode
        self.maps = {tuple(k): dict(v) for k, v in (maps or {}).items()}

    def translate(self, text: str, source: str, target: str) -> str:
        if self.mode == "identity":
            return text
        if self.mode == "word_reverse":
            return " ".join(reversed(_words(text)))
        table = self.maps.get((source, target), {})
        return " ".join(table.get(w, w) for w in _words(text))


class StubParaphraser:
    """
    Modes
    -----
    suffix_tag   : appends " #para<seed>" so every seed yields a distinct candidate.
    identity     : returns the input.
    word_shuffle : permutes tokens with a generator seeded by seed.
    fail_seeds raises BackendError for the listed seeds.
    """
    concurrency = ConcurrencyClass.REENTRANT
    MODES = ("suffix_tag", "identity", "word_shuffle")

    def __init__(self, mode: str = "suffix_tag", fail_seeds=()):
        if mode not in self.MODES:
            raise ValueError(f"unknown paraphraser mode {mode!r}")
        self.mode = mode
        self.fail_seeds = frozenset(fail_seeds)

    def paraphrase(self, text: str, template: str, seed: int) -> str:
        if seed in self.fail_seeds:
            raise BackendError(f"stub paraphraser configured to fail on seed {seed}")
        if self.mode == "identity":
            return text
        if self.mode == "suffix_tag":
            return f"{text} #para{seed}"
        words = _words(text)
        order = np.random.default_rng(seed).permutation(len(words))
        return " ".join(words[i] for i in order)


class StubCaptioner:
    """Fixed caption when given, otherwise a caption naming the dominant colour channel."""
    concurrency = ConcurrencyClass.REENTRANT

    def __init__(self, caption: str | None = None):
        self.fixed = caption

    def caption(self, image: ImageTensor) -> str:
        if self.fixed:
            return self.fixed
        means = image.pixels.reshape(-1, 3).mean(axis=0)
        return f"a photo with mostly {_CHANNEL_NAMES[int(np.argmax(means))]} tones"


class StubImageGen:
    """
    Modes
    -----
    identity : returns the input image object unchanged.
    invert   : x -> 255 - x on the 8-bit grid.
    tint     : adds tint_amount (8-bit units) to one channel, clamped to [0, 255].
    Non-identity modes quantize to 8 bit, like a real generator writing RGB output.
    """
    concurrency = ConcurrencyClass.REENTRANT
    MODES = ("identity", "invert", "tint")

    def __init__(self, mode: str = "identity", tint_channel: int = 0, tint_amount: int = 40):
        if mode not in self.MODES:
            raise ValueError(f"unknown imagegen mode {mode!r}")
        if tint_channel not in (0, 1, 2):
            raise ValueError("tint_channel must be 0, 1 or 2")
        self.mode = mode
        self.tint_channel = tint_channel
        self.tint_amount = int(tint_amount)

    def generate(self, image: ImageTensor, prompt: str, strength: float, seed: int) -> ImageTensor:
        if self.mode == "identity":
            return image
        q = to_uint8(image).astype(np.int32)
        if self.mode == "invert":
            out = 255 - q
        else:
            out = q.copy()
            out[..., self.tint_channel] = np.clip(out[..., self.tint_channel] + self.tint_amount, 0, 255)
        return from_uint8(out.astype(np.uint8))


class StubEmbedder:
    """Hashed bag-of-tokens sentence embedding.

    Each lower-cased whitespace token maps to a fixed Gaussian vector derived from
    (seed, crc32(token)); the text embedding is their sum. An explicit ``table`` overrides
    the hashed vector for the tokens it lists (used to build orthogonal embeddings).
    """
    concurrency = ConcurrencyClass.REENTRANT

    def __init__(self, dim: int = 16, seed: int = 0, table: Mapping[str, np.ndarray] | None = None):
        if dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self.dim = dim
        self.seed = seed
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in (table or {}).items()}
        for k, v in self.table.items():
            if v.shape != (dim,):
                raise ValueError(f"table vector for {k!r} has shape {v.shape}, expected ({dim},)")

    def _token_vector(self, token: str) -> np.ndarray:
        if token in self.table:
            return self.table[token]
        rng = np.random.default_rng([self.seed, zlib.crc32(token.encode("utf-8"))])
        return rng.standard_normal(self.dim)

    def embed(self, text: str) -> np.ndarray:
        tokens = text.lower().split()
        if not tokens:
            raise ValueError("empty input")
        return np.sum([self._token_vector(t) for t in tokens], axis=0)


class StubLm:
    """Uniform language model: every token costs log(vocab_size) nats."""
    concurrency = ConcurrencyClass.REENTRANT

    def __init__(self, vocab_size: int = 50):
        if vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        self.vocab_size = vocab_size
        self._nll = math.log(vocab_size)

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def score(self, tokens: list[str]) -> np.ndarray:
        return np.full(len(tokens), self._nll, dtype=np.float64)


def stub_translator(mode: str = "identity", maps=None) -> StubTranslator:
    return StubTranslator(mode, maps)


def stub_paraphraser(mode: str = "suffix_tag", fail_seeds=()) -> StubParaphraser:
    return StubParaphraser(mode, fail_seeds)


def stub_captioner(caption: str | None = None) -> StubCaptioner:
    return StubCaptioner(caption)


def stub_imagegen(mode: str = "identity", tint_channel: int = 0, tint_amount: int = 40) -> StubImageGen:
    return StubImageGen(mode, tint_channel, tint_amount)


def stub_embedder(d_e: int = 16, seed: int = 0, table=None) -> StubEmbedder:
    return StubEmbedder(d_e, seed, table)


def stub_lm(vocab_size: int = 50) -> StubLm:
    return StubLm(vocab_size)
