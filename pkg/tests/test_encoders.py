import numpy as np
import pytest

from backends.stubs import StubEmbedder
from core.encoders import (
    EncoderSpec,
    ExternalEncoder,
    Modality,
    ToyImageEncoder,
    ToyTextEncoder,
    encode_image_toy,
    encode_text_toy,
    token_bucket,
)
from core.layers import init_params
from dataset.images import ImageTensor


def test_text_features_are_mean_bucket_counts():
    enc = ToyTextEncoder("t", 4, n_buckets=32)
    row = enc.featurize_one("Flood flood bridge")
    assert row.sum() == pytest.approx(1.0)
    assert row[token_bucket("flood", 32)] >= 2 / 3
    assert np.array_equal(row, enc.featurize_one("bridge FLOOD flood"))


def test_empty_text_cannot_be_encoded():
    with pytest.raises(ValueError):
        ToyTextEncoder("t", 4).featurize_one("  ")


def test_featurize_empty_batch_has_feature_width():
    assert ToyTextEncoder("t", 4, 8).featurize([]).shape == (0, 8)
    assert ToyImageEncoder("i", 4, 8, 4).featurize([]).shape == (0, 12)


def test_image_features_are_patch_means():
    enc = ToyImageEncoder("i", 4, image_size=4, patch_size=2)
    pixels = np.zeros((4, 4, 3))
    pixels[:2, :2] = [1.0, 0.5, 0.0]
    feats = enc.featurize_one(ImageTensor(pixels))
    assert feats.shape == (12,)
    assert np.allclose(feats[:3], [1.0, 0.5, 0.0])
    assert np.allclose(feats[3:], 0.0)


def test_image_encoder_checks_sizes():
    with pytest.raises(ValueError):
        ToyImageEncoder("i", 4, image_size=10, patch_size=4)
    with pytest.raises(ValueError):
        ToyImageEncoder("i", 4, 8, 4).featurize_one(ImageTensor.constant(4, 4, [0.0, 0.0, 0.0]))


def test_encoder_spec_validation():
    assert EncoderSpec("text", 8).modality is Modality.TEXT
    with pytest.raises(ValueError):
        EncoderSpec(Modality.TEXT, 8, "plugin")
    with pytest.raises(ValueError):
        EncoderSpec(Modality.IMAGE, 0)
    with pytest.raises(ValueError):
        EncoderSpec(Modality.IMAGE, 8, "pretrained")


def test_external_encoder_uses_frozen_backend_embedding():
    emb = StubEmbedder(dim=6, seed=2)
    enc = ExternalEncoder("text", 4, emb)
    assert enc.param_shapes()["text.proj.W"] == ((6, 4), 6)
    assert np.array_equal(enc.featurize_one("power out"), emb.embed("power out"))
    params = init_params(enc.param_shapes(), 0)
    out, _ = enc.forward(params, enc.featurize(["power out", "need help"]))
    assert out.shape == (2, 4)


def test_toy_encodings_are_seed_deterministic():
    a = encode_text_toy("roads closed", 8, seed=1, n_buckets=64)
    assert a.shape == (8,)
    assert np.array_equal(a, encode_text_toy("roads closed", 8, seed=1, n_buckets=64))
    assert not np.array_equal(a, encode_text_toy("roads closed", 8, seed=2, n_buckets=64))
    img = ImageTensor.constant(8, 8, [0.3, 0.6, 0.9])
    assert np.array_equal(encode_image_toy(img, 8, 3, patch_size=4), encode_image_toy(img, 8, 3, patch_size=4))


def test_text_encoder_gradients_match_finite_differences():
    enc = ToyTextEncoder("t", 3, n_buckets=8)
    params = init_params(enc.param_shapes(), 4)
    feats = enc.featurize(["a b c", "d a", "e"])
    r = np.random.default_rng(0).normal(size=(3, 3))

    def loss():
        return float((enc.forward(params, feats)[0] * r).sum())

    _, cache = enc.forward(params, feats)
    grads = enc.backward(params, cache, r)
    eps = 1e-6
    for name, p in params.items():
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + eps
            up = loss()
            p[i] = old - eps
            num[i] = (up - loss()) / (2 * eps)
            p[i] = old
        assert np.allclose(grads[name], num, atol=1e-7)
