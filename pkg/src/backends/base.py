"""
Adapter interfaces for every external generative or scoring model.

Each capability is a Protocol; stubs (stubs.py) and plugins (plugin.py) implement them.
Every backend declares a concurrency class. Reentrant backends may be called from many
threads; serialized backends are routed through a single-consumer queue (see
serialized()).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from typing import Protocol, runtime_checkable

import numpy as np

from dataset.images import ImageTensor


class ConcurrencyClass(StrEnum):
    REENTRANT  = "reentrant"
    SERIALIZED = "serialized"


@runtime_checkable
class TranslatorBackend(Protocol):
    concurrency: ConcurrencyClass

    def translate(self, text: str, source: str, target: str) -> str: ...


@runtime_checkable
class ParaphraserBackend(Protocol):
    concurrency: ConcurrencyClass

    def paraphrase(self, text: str, template: str, seed: int) -> str: ...


@runtime_checkable
class CaptionerBackend(Protocol):
    concurrency: ConcurrencyClass

    def caption(self, image: ImageTensor) -> str: ...


@runtime_checkable
class ImageGenBackend(Protocol):
    concurrency: ConcurrencyClass

    def generate(self, image: ImageTensor, prompt: str, strength: float, seed: int) -> ImageTensor: ...


@runtime_checkable
class EmbedderBackend(Protocol):
    concurrency: ConcurrencyClass
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


@runtime_checkable
class LmScorerBackend(Protocol):
    """Scores token sequences with per-token natural-log negative log-likelihoods.
    The scorer owns its tokenizer because vocabularies are model-specific."""
    concurrency: ConcurrencyClass

    def tokenize(self, text: str) -> list[str]: ...

    def score(self, tokens: list[str]) -> np.ndarray: ...


@dataclass
class Backends:
    translator:  TranslatorBackend | None = None
    paraphraser: ParaphraserBackend | None = None
    captioner:   CaptionerBackend | None = None
    imagegen:    ImageGenBackend | None = None
    embedder:    EmbedderBackend | None = None
    scorer:      LmScorerBackend | None = None

    def close(self):
        for backend in (self.translator, self.paraphraser, self.captioner,
                        self.imagegen, self.embedder, self.scorer):
            close = getattr(backend, "close", None)
            if close is not None:
                close()


class _SerializedProxy:
    """Forwards every method call through one worker thread, in submission order."""

    def __init__(self, backend):
        self._backend = backend
        self._queue = ThreadPoolExecutor(max_workers=1, thread_name_prefix="backend")
        self.concurrency = ConcurrencyClass.SERIALIZED

    def __getattr__(self, name):
        attr = getattr(self._backend, name)
        if not callable(attr):
            return attr

        def call(*args, **kwargs):
            return self._queue.submit(attr, *args, **kwargs).result()
        return call

    def close(self):
        self._queue.shutdown(wait=True)
        close = getattr(self._backend, "close", None)
        if close is not None:
            close()


def serialized(backend):
    """Wrap a backend that declares SERIALIZED concurrency; reentrant ones pass through."""
    if backend is None or getattr(backend, "concurrency", None) is not ConcurrencyClass.SERIALIZED:
        return backend
    if isinstance(backend, _SerializedProxy):
        return backend
    return _SerializedProxy(backend)
