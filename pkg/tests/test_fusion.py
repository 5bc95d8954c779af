import numpy as np
import pytest

from errors import ConfigError, NumericError
from augment.records import AugMethod, accepted_samples
from augment.text import augment_text_corpus
from backends.base import Backends
from backends.stubs import StubCaptioner, StubEmbedder, StubTranslator
from core.fusion import (
    Arch,
    FusionConfig,
    FusionModel,
    ViewBundle,
    build_view_bundles,
    forward_early_fusion,
    forward_multiview,
    gradients,
    loss_and_gradients,
)
from core.layers import softmax_cross_entropy
from dataset.images import ImageTensor
from dataset.schema import HumanitarianLabel, Split
from dataset.synthetic import SyntheticImages

SMALL = dict(d=8, heads=2, n_buckets=16, image_size=8, patch_size=4)


def _image(seed, size=8):
    return ImageTensor(np.random.default_rng(seed).random((size, size, 3)))


def _bundles():
    labels = list(HumanitarianLabel)
    return [
        ViewBundle.from_pair("bridge down", _image(0), labels[0], "a",
                             aug_text="the bridge is down", aug_image=_image(1), caption="a broken bridge"),
        ViewBundle.from_pair("need water", _image(2), labels[1], "b", aug_text="water needed"),
        ViewBundle.from_pair("volunteers here", _image(3), labels[2], "c", caption="people with boxes"),
    ]


def _model(arch, **kw):
    return FusionModel(FusionConfig(arch, **{**SMALL, **kw}))


# ------------------------------------------------------------------ config and bundles

def test_config_validation():
    with pytest.raises(ConfigError):
        FusionConfig("late_fusion")
    with pytest.raises(ConfigError):
        FusionConfig(d=10, heads=4)
    with pytest.raises(ConfigError):
        FusionConfig(n_classes=7)
    with pytest.raises(ConfigError):
        FusionConfig(image_size=30, patch_size=8)
    with pytest.raises(ConfigError):
        FusionConfig(caption_encoder="separate")


def test_config_round_trip():
    c = FusionConfig(Arch.MULTIVIEW_SELF_CROSS, d=16, heads=4, seed=3, self_layers=2)
    assert FusionConfig.from_dict(c.to_dict()) == c


def test_bundle_needs_both_originals():
    with pytest.raises(ValueError):
        ViewBundle(("text", None, None, None, None), (True, False, False, False, False))
    with pytest.raises(ValueError):
        ViewBundle.from_pair("text", _image(0), aug_text="   ")


def test_originals_only_drops_auxiliary_views():
    b = _bundles()[0]
    assert b.n_present == 5
    o = b.originals_only()
    assert o.presence == (True, True, False, False, False)
    assert o.views[:2] == b.views[:2]
    assert o.label is b.label


# ------------------------------------------------------------------ forward

def test_absent_views_cannot_reach_the_logits():
    model = _model(Arch.MULTIVIEW_SELF_CROSS, self_layers=2)
    rng = np.random.default_rng(0)
    E = rng.normal(size=(4, 5, 8))
    presence = np.array([[1, 1, 0, 0, 0], [1, 1, 1, 0, 0], [1, 1, 0, 1, 1], [1, 1, 0, 0, 1]], dtype=bool)
    logits, _ = model.forward_from_embeddings(E, presence)
    junk = E.copy()
    junk[~presence] = rng.normal(scale=100.0, size=(int((~presence).sum()), 8))
    again, _ = model.forward_from_embeddings(junk, presence)
    assert np.array_equal(logits, again)


def test_absent_views_never_reach_logits_for_random_presence():
    rng = np.random.default_rng(5)
    for arch in (Arch.MULTIVIEW_CROSS, Arch.MULTIVIEW_SELF_CROSS, Arch.EARLY_FUSION):
        model = _model(arch, self_layers=1, seed=6)
        for _ in range(100):
            presence = np.ones((3, 5), dtype=bool)
            presence[:, 2:] = rng.random((3, 3)) < 0.5
            E = rng.normal(size=(3, 5, 8))
            logits, _ = model.forward_from_embeddings(E, presence)
            junk = E.copy()
            junk[~presence] = rng.normal(scale=50.0, size=(int((~presence).sum()), 8))
            assert np.array_equal(model.forward_from_embeddings(junk, presence)[0], logits)


@pytest.mark.parametrize("arch", [Arch.MULTIVIEW_CROSS, Arch.MULTIVIEW_SELF_CROSS])
def test_multiview_ignores_the_order_of_auxiliary_slots(arch):
    model = _model(arch, self_layers=2, seed=8)
    rng = np.random.default_rng(9)
    for _ in range(50):
        E = rng.normal(size=(4, 5, 8))
        presence = np.ones((4, 5), dtype=bool)
        presence[:, 2:] = rng.random((4, 3)) < 0.6
        order = np.concatenate([[0, 1], 2 + rng.permutation(3)])
        logits, _ = model.forward_from_embeddings(E, presence)
        shuffled, _ = model.forward_from_embeddings(E[:, order], presence[:, order])
        assert np.allclose(logits, shuffled, atol=1e-12)


def test_auxiliary_views_change_multiview_output():
    model = _model(Arch.MULTIVIEW_CROSS)
    b = _bundles()[0]
    assert not np.allclose(forward_multiview(b, model), forward_multiview(b.originals_only(), model))


def test_early_fusion_ignores_auxiliary_views():
    model = _model(Arch.EARLY_FUSION)
    b = _bundles()[0]
    assert np.array_equal(forward_early_fusion(b, model), forward_early_fusion(b.originals_only(), model))


def test_early_fusion_closed_form():
    model = _model(Arch.EARLY_FUSION)
    p = model.params
    E = np.random.default_rng(1).normal(size=(3, 5, 8))
    x = np.concatenate([E[:, 0], E[:, 1]], axis=1)
    expected = np.tanh(x @ p["head.hidden.W"] + p["head.hidden.b"]) @ p["head.out.W"] + p["head.out.b"]
    logits, _ = model.forward_from_embeddings(E, np.ones((3, 5), dtype=bool))
    assert np.allclose(logits, expected, atol=1e-12)


def _manual_cross(model, E, presence):
    p, c = model.params, model.config
    dh = c.d // c.heads
    rows = []
    for e, mask in zip(E, presence):
        q = np.concatenate([e[0], e[1]]) @ p["fuse.W"] + p["fuse.b"]
        keys = e[mask]
        Q = q @ p["cross.q.W"] + p["cross.q.b"]
        K = keys @ p["cross.k.W"] + p["cross.k.b"]
        V = keys @ p["cross.v.W"] + p["cross.v.b"]
        ctx = []
        for h in range(c.heads):
            s = slice(h * dh, (h + 1) * dh)
            scores = K[:, s] @ Q[s] / np.sqrt(dh)
            w = np.exp(scores - scores.max())
            ctx.append((w / w.sum()) @ V[:, s])
        x = q + np.concatenate(ctx) @ p["cross.o.W"] + p["cross.o.b"]
        rows.append(np.tanh(x @ p["head.hidden.W"] + p["head.hidden.b"]) @ p["head.out.W"] + p["head.out.b"])
    return np.array(rows)


def test_multiview_cross_closed_form():
    model = _model(Arch.MULTIVIEW_CROSS, seed=4)
    E = np.random.default_rng(2).normal(size=(3, 5, 8))
    presence = np.array([[1, 1, 1, 1, 1], [1, 1, 0, 0, 0], [1, 1, 0, 1, 0]], dtype=bool)
    logits, _ = model.forward_from_embeddings(E, presence)
    assert np.allclose(logits, _manual_cross(model, E, presence), atol=1e-12)


def test_unimodal_archs_read_one_view():
    b = _bundles()[1]
    other_image = ViewBundle.from_pair(b.views[0], _image(9), b.label)
    other_text = ViewBundle.from_pair("totally different words", b.views[1], b.label)
    text_model, image_model = _model(Arch.TEXT_ONLY), _model(Arch.IMAGE_ONLY)
    assert np.array_equal(text_model.logits([b]), text_model.logits([other_image]))
    assert np.array_equal(image_model.logits([b]), image_model.logits([other_text]))
    assert text_model.slots == (0,) and image_model.slots == (1,)


def test_wrong_arch_for_single_bundle_forward():
    b = _bundles()[0]
    with pytest.raises(ConfigError):
        forward_early_fusion(b, _model(Arch.MULTIVIEW_CROSS))
    with pytest.raises(ConfigError):
        forward_multiview(b, _model(Arch.EARLY_FUSION))


def test_images_are_resized_to_model_size():
    model = _model(Arch.EARLY_FUSION)
    b = ViewBundle.from_pair("flood", _image(0, size=20), HumanitarianLabel.OTHER_RELEVANT)
    assert model.logits([b]).shape == (1, 5)


def test_predict_breaks_ties_to_lowest_index():
    model = _model(Arch.EARLY_FUSION)
    model.params["head.out.W"][:] = 0.0
    model.params["head.out.b"][:] = 0.0
    assert list(model.predict(_bundles())) == [0, 0, 0]


def test_plugin_text_encoder():
    with pytest.raises(ConfigError):
        FusionModel(FusionConfig(text_encoder="plugin", **SMALL))
    model = FusionModel(FusionConfig(text_encoder="plugin", **SMALL), StubEmbedder(dim=6))
    assert model.params["text.proj.W"].shape == (6, 8)
    assert model.logits(_bundles()).shape == (3, 5)


def test_dedicated_caption_encoder_has_own_parameters():
    shared = _model(Arch.MULTIVIEW_CROSS)
    dedicated = _model(Arch.MULTIVIEW_CROSS, caption_encoder="dedicated")
    assert not any(name.startswith("caption.") for name in shared.params)
    assert "caption.emb" in dedicated.params


def test_load_params_checks_names_and_shapes():
    model = _model(Arch.EARLY_FUSION)
    params = model.copy_params()
    params["head.out.b"] = np.zeros(3)
    with pytest.raises(ConfigError, match="shape"):
        model.load_params(params)
    del params["head.out.b"]
    with pytest.raises(ConfigError, match="missing"):
        model.load_params(params)


# ------------------------------------------------------------------ gradients

@pytest.mark.parametrize("arch, extra", [
    (Arch.MULTIVIEW_SELF_CROSS, {"caption_encoder": "dedicated"}),
    (Arch.MULTIVIEW_CROSS, {}),
    (Arch.EARLY_FUSION, {}),
])
def test_gradients_match_finite_differences(arch, extra):
    model = _model(arch, seed=2, **extra)
    batch = model.featurize(_bundles())
    loss, grads = loss_and_gradients(model, batch)
    assert set(grads) == set(model.params)

    def objective():
        return softmax_cross_entropy(model.forward(batch)[0], batch.labels)[0]

    assert objective() == pytest.approx(loss)
    eps = 1e-6
    for name, p in model.params.items():
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + eps
            up = objective()
            p[i] = old - eps
            num[i] = (up - objective()) / (2 * eps)
            p[i] = old
        assert np.allclose(grads[name], num, atol=1e-7), name


def test_gradients_need_labels():
    model = _model(Arch.EARLY_FUSION)
    batch = model.featurize([b.originals_only() for b in _bundles()])
    batch.labels = None
    with pytest.raises(ValueError):
        gradients(model, batch)


def test_non_finite_logits_are_numeric_error():
    model = _model(Arch.EARLY_FUSION)
    model.params["head.out.b"][0] = np.inf
    with pytest.raises(NumericError):
        loss_and_gradients(model, model.featurize(_bundles()))


# ------------------------------------------------------------------ training bundles

def test_build_view_bundles_uses_first_accepted_children(tiny_spec, tiny_samples):
    train = [s for s in tiny_samples if s.split is Split.TRAIN]
    images = SyntheticImages(tiny_spec)
    bt = augment_text_corpus(train, AugMethod.BACK_TRANSLATION,
                             Backends(translator=StubTranslator("word_reverse")))
    cap = augment_text_corpus(train[:2], AugMethod.CAPTION_CONCAT,
                              Backends(captioner=StubCaptioner("a flooded street")), image_source=images)
    bundles = build_view_bundles(train + accepted_samples(bt), bt + cap, images)

    assert [b.sample_id for b in bundles] == [s.sample_id for s in train]
    first = bundles[0]
    assert first.views[2] == bt[0].new_sample.tweet_text
    assert first.views[4] == "a flooded street"
    assert first.presence == (True, True, True, False, True)
    assert bundles[-1].presence == (True, True, True, False, False)
    assert first.views[1].equals(images(train[0]))
