"""
View encoders: raw view content -> d-dimensional vector.

Each encoder splits into a parameter-free featurize() (done once per sample and cached by
the training harness) and a trainable forward()/backward() pair over the features.

ToyTextEncoder   hashed-token embedding bag, mean pooled, linear to d
ToyImageEncoder  non-overlapping patch means, flattened, linear to d
ExternalEncoder  frozen backend embedding (plugin model), linear to d
"""

import zlib
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from dataset.images import ImageTensor
from core.layers import init_params, linear, linear_backward, linear_shapes

DEFAULT_BUCKETS = 1024


class Modality(StrEnum):
    TEXT  = "text"
    IMAGE = "image"


@dataclass(frozen=True)
class EncoderSpec:
    """
    Fields
    ------
    modality   : text or image.
    output_dim : Width d shared by every encoder of one model.
    kind       : "toy" or "plugin".
    name       : Plugin backend name when kind == "plugin".
    """
    modality:   Modality
    output_dim: int
    kind:       str = "toy"
    name:       str | None = None

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality(self.modality))
        if self.kind not in ("toy", "plugin"):
            raise ValueError(f"encoder kind must be toy or plugin, got {self.kind!r}")
        if self.kind == "plugin" and not self.name:
            raise ValueError("plugin encoders need a backend name")
        if self.output_dim < 1:
            raise ValueError("output_dim must be positive")


def text_tokens(text: str) -> list[str]:
    return text.lower().split()


def token_bucket(token: str, n_buckets: int) -> int:
    return zlib.crc32(token.encode("utf-8")) % n_buckets


class ToyTextEncoder:
    def __init__(self, prefix: str, d: int, n_buckets: int = DEFAULT_BUCKETS):
        self.prefix = prefix
        self.d = d
        self.n_buckets = n_buckets
        self.spec = EncoderSpec(Modality.TEXT, d)

    def param_shapes(self) -> dict:
        # Embedding rows are looked up, not summed over inputs: fan_in 1.
        shapes = {f"{self.prefix}.emb": ((self.n_buckets, self.d), 1)}
        shapes.update(linear_shapes(f"{self.prefix}.proj", self.d, self.d))
        return shapes

    def featurize_one(self, text: str) -> np.ndarray:
        tokens = text_tokens(text)
        if not tokens:
            raise ValueError("cannot encode empty text")
        row = np.zeros(self.n_buckets)
        for tok in tokens:
            row[token_bucket(tok, self.n_buckets)] += 1.0
        return row / len(tokens)

    def featurize(self, texts) -> np.ndarray:
        return np.stack([self.featurize_one(t) for t in texts]) if texts else np.zeros((0, self.n_buckets))

    def forward(self, params, feats: np.ndarray):
        pooled = feats @ params[f"{self.prefix}.emb"]
        out, _ = linear(params, f"{self.prefix}.proj", pooled)
        return out, (feats, pooled)

    def backward(self, params, cache, dout: np.ndarray) -> dict:
        feats, pooled = cache
        dpooled, grads = linear_backward(params, f"{self.prefix}.proj", pooled, dout)
        grads[f"{self.prefix}.emb"] = feats.T @ dpooled
        return grads


class ToyImageEncoder:
    def __init__(self, prefix: str, d: int, image_size: int, patch_size: int):
        if image_size % patch_size:
            raise ValueError(f"image_size {image_size} is not a multiple of patch_size {patch_size}")
        self.prefix = prefix
        self.d = d
        self.image_size = image_size
        self.patch_size = patch_size
        self.n_features = (image_size // patch_size) ** 2 * 3
        self.spec = EncoderSpec(Modality.IMAGE, d)

    def param_shapes(self) -> dict:
        return linear_shapes(f"{self.prefix}.proj", self.n_features, self.d)

    def featurize_one(self, img: ImageTensor) -> np.ndarray:
        s, p = self.image_size, self.patch_size
        if img.shape != (s, s):
            raise ValueError(f"image is {img.height}x{img.width}, encoder expects {s}x{s}")
        n = s // p
        return img.pixels.reshape(n, p, n, p, 3).mean(axis=(1, 3)).reshape(-1)

    def featurize(self, images) -> np.ndarray:
        return np.stack([self.featurize_one(i) for i in images]) if images else np.zeros((0, self.n_features))

    def forward(self, params, feats: np.ndarray):
        out, _ = linear(params, f"{self.prefix}.proj", feats)
        return out, feats

    def backward(self, params, cache, dout: np.ndarray) -> dict:
        return linear_backward(params, f"{self.prefix}.proj", cache, dout)[1]


class ExternalEncoder:
    """Frozen pre-trained embedding from a backend (anything with .dim and .embed(x)),
    followed by a trainable projection to d. Only the projection is fine-tuned."""

    def __init__(self, prefix: str, d: int, backend, modality: Modality = Modality.TEXT, name: str = "plugin"):
        self.prefix = prefix
        self.d = d
        self.backend = backend
        self.spec = EncoderSpec(modality, d, "plugin", name)

    def param_shapes(self) -> dict:
        return linear_shapes(f"{self.prefix}.proj", self.backend.dim, self.d)

    def featurize_one(self, item) -> np.ndarray:
        return np.asarray(self.backend.embed(item), dtype=np.float64)

    def featurize(self, items) -> np.ndarray:
        return np.stack([self.featurize_one(i) for i in items]) if items else np.zeros((0, self.backend.dim))

    def forward(self, params, feats: np.ndarray):
        out, _ = linear(params, f"{self.prefix}.proj", feats)
        return out, feats

    def backward(self, params, cache, dout: np.ndarray) -> dict:
        return linear_backward(params, f"{self.prefix}.proj", cache, dout)[1]


def encode_text_toy(text: str, d: int, seed: int, n_buckets: int = DEFAULT_BUCKETS) -> np.ndarray:
    """Encode one text with a freshly seeded toy text encoder."""
    enc = ToyTextEncoder("text", d, n_buckets)
    params = init_params(enc.param_shapes(), seed)
    return enc.forward(params, enc.featurize([text]))[0][0]


def encode_image_toy(img: ImageTensor, d: int, seed: int, image_size: int | None = None,
                     patch_size: int = 8) -> np.ndarray:
    """Encode one image with a freshly seeded toy image encoder (image must already be image_size)."""
    enc = ToyImageEncoder("image", d, image_size or img.height, patch_size)
    params = init_params(enc.param_shapes(), seed)
    return enc.forward(params, enc.featurize([img]))[0][0]
