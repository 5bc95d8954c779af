"""
Fusion classifiers over the five-view input structure.

    slot 0 orig_text    slot 1 orig_image    slot 2 aug_text    slot 3 aug_image    slot 4 caption

early_fusion          head(concat(t0, v0))
multiview_cross       r = q + MHA(q, E, mask),  q = fuse(concat(t0, v0)),  head(r)
multiview_self_cross  E <- E + MHA(E, E, mask) (self_layers times) before the cross block
text_only/image_only  head(t0) / head(v0)

Absent views are never featurized; their embedding rows are zero and the presence mask
removes them as attention keys, so placeholder content cannot reach the logits.
At inference only the original pair is supplied (ViewBundle.originals_only()).
"""

from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np

from errors import ConfigError, NumericError
from dataset.images import ImageTensor
from dataset.schema import N_CLASSES, HumanitarianLabel, label_index
from augment.compositing import resize
from augment.records import AugMethod
from core.encoders import DEFAULT_BUCKETS, ExternalEncoder, Modality, ToyImageEncoder, ToyTextEncoder
from core.layers import (
    attention_shapes,
    init_params,
    linear,
    linear_backward,
    linear_shapes,
    multi_head_attention,
    multi_head_attention_backward,
    softmax_cross_entropy,
    tanh_backward,
)

VIEW_SLOTS = ("orig_text", "orig_image", "aug_text", "aug_image", "caption")
N_VIEWS = len(VIEW_SLOTS)
TEXT_SLOTS = (0, 2, 4)
IMAGE_SLOTS = (1, 3)
AUX_SLOTS = (2, 3, 4)


class Arch(StrEnum):
    EARLY_FUSION         = "early_fusion"
    MULTIVIEW_CROSS      = "multiview_cross"
    MULTIVIEW_SELF_CROSS = "multiview_self_cross"
    TEXT_ONLY            = "text_only"
    IMAGE_ONLY           = "image_only"

    @property
    def multiview(self) -> bool:
        return self in (Arch.MULTIVIEW_CROSS, Arch.MULTIVIEW_SELF_CROSS)


@dataclass(frozen=True)
class FusionConfig:
    """
    Fields
    ------
    arch            : Architecture, see Arch.
    d               : Shared encoder output width.
    heads           : Attention heads; d must be divisible by heads.
    n_classes       : Fixed at 5 (humanitarian task).
    seed            : Parameter initialization seed.
    hidden          : Head hidden width; None means d.
    n_buckets       : Hashed token buckets of the toy text encoder.
    image_size      : Square input size images are resized to before encoding.
    patch_size      : Toy image encoder patch edge; must divide image_size.
    self_layers     : Self-attention blocks before the cross block (multiview_self_cross only).
    caption_encoder : "shared" reuses the text encoder for captions, "dedicated" adds one.
    text_encoder    : "toy" or "plugin" (frozen backend embedding + trainable projection).
    """
    arch:            Arch = Arch.EARLY_FUSION
    d:               int = 32
    heads:           int = 2
    n_classes:       int = N_CLASSES
    seed:            int = 0
    hidden:          int | None = None
    n_buckets:       int = DEFAULT_BUCKETS
    image_size:      int = 224
    patch_size:      int = 16
    self_layers:     int = 1
    caption_encoder: str = "shared"
    text_encoder:    str = "toy"

    def __post_init__(self):
        try:
            object.__setattr__(self, "arch", Arch(self.arch))
        except ValueError as e:
            raise ConfigError(f"unknown architecture {self.arch!r}") from e
        if self.n_classes != N_CLASSES:
            raise ConfigError(f"n_classes must be {N_CLASSES}, got {self.n_classes}")
        if self.d < 1 or self.heads < 1 or self.d % self.heads:
            raise ConfigError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if self.hidden is not None and self.hidden < 1:
            raise ConfigError("hidden must be positive")
        if self.patch_size < 1 or self.image_size % self.patch_size:
            raise ConfigError(f"patch_size {self.patch_size} must divide image_size {self.image_size}")
        if self.n_buckets < 1 or self.self_layers < 1:
            raise ConfigError("n_buckets and self_layers must be positive")
        if self.caption_encoder not in ("shared", "dedicated"):
            raise ConfigError(f"caption_encoder must be shared or dedicated, got {self.caption_encoder!r}")
        if self.text_encoder not in ("toy", "plugin"):
            raise ConfigError(f"text_encoder must be toy or plugin, got {self.text_encoder!r}")

    @property
    def hidden_dim(self) -> int:
        return self.hidden or self.d

    def to_dict(self) -> dict:
        return {
            "arch":            self.arch.value,
            "d":               self.d,
            "heads":           self.heads,
            "n_classes":       self.n_classes,
            "seed":            self.seed,
            "hidden":          self.hidden,
            "n_buckets":       self.n_buckets,
            "image_size":      self.image_size,
            "patch_size":      self.patch_size,
            "self_layers":     self.self_layers,
            "caption_encoder": self.caption_encoder,
            "text_encoder":    self.text_encoder,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FusionConfig":
        return cls(**raw)


@dataclass(frozen=True, eq=False)
class ViewBundle:
    """
    Fields
    ------
    views     : Five slots in VIEW_SLOTS order; text slots hold str, image slots ImageTensor.
                Content of an absent slot is a placeholder and is never read.
    presence  : Five booleans; both originals must be present.
    label     : Gold label, None at inference.
    sample_id : Id of the original sample the bundle is built around.
    """
    views:     tuple
    presence:  tuple
    label:     HumanitarianLabel | None = None
    sample_id: str = ""

    def __post_init__(self):
        views = tuple(self.views)
        presence = tuple(bool(p) for p in self.presence)
        if len(views) != N_VIEWS or len(presence) != N_VIEWS:
            raise ValueError(f"a bundle has exactly {N_VIEWS} view slots")
        if not (presence[0] and presence[1]):
            raise ValueError(f"{self.sample_id or 'bundle'}: original text and image must be present")
        for slot, (view, present) in enumerate(zip(views, presence)):
            if not present:
                continue
            if slot in TEXT_SLOTS and not (isinstance(view, str) and view.strip()):
                raise ValueError(f"{self.sample_id or 'bundle'}: {VIEW_SLOTS[slot]} must be non-empty text")
            if slot in IMAGE_SLOTS and not isinstance(view, ImageTensor):
                raise ValueError(f"{self.sample_id or 'bundle'}: {VIEW_SLOTS[slot]} must be an ImageTensor")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "presence", presence)

    @classmethod
    def from_pair(cls, text: str, image: ImageTensor, label=None, sample_id: str = "", *,
                  aug_text=None, aug_image=None, caption=None) -> "ViewBundle":
        views = (text, image, aug_text, aug_image, caption)
        return cls(views, tuple(v is not None for v in views), label, sample_id)

    def originals_only(self) -> "ViewBundle":
        return replace(self, views=(self.views[0], self.views[1], None, None, None),
                       presence=(True, True, False, False, False))

    @property
    def n_present(self) -> int:
        return sum(self.presence)


@dataclass
class ViewFeatures:
    """Encoder inputs for a batch: one (B, F_slot) array per slot, zero rows where absent."""
    feats:      list = field(default_factory=list)
    presence:   np.ndarray | None = None
    labels:     np.ndarray | None = None
    sample_ids: tuple = ()

    def __len__(self):
        return 0 if self.presence is None else self.presence.shape[0]

    def take(self, idx) -> "ViewFeatures":
        idx = np.asarray(idx)
        return ViewFeatures(
            feats=[f[idx] for f in self.feats],
            presence=self.presence[idx],
            labels=None if self.labels is None else self.labels[idx],
            sample_ids=tuple(self.sample_ids[i] for i in idx),
        )


class FusionModel:
    """Parameters plus the encoders and blocks of one FusionConfig.

    Forward passes only read self.params, so several threads may evaluate one model.
    """

    def __init__(self, config: FusionConfig, text_backend=None):
        self.config = config
        c = config
        if c.text_encoder == "plugin":
            if text_backend is None:
                raise ConfigError("text_encoder 'plugin' needs an embedder backend")
            self.text_enc = ExternalEncoder("text", c.d, text_backend, Modality.TEXT)
        else:
            self.text_enc = ToyTextEncoder("text", c.d, c.n_buckets)
        self.image_enc = ToyImageEncoder("image", c.d, c.image_size, c.patch_size)
        self.caption_enc = (ToyTextEncoder("caption", c.d, c.n_buckets)
                            if c.caption_encoder == "dedicated" else self.text_enc)
        self.params = init_params(self.param_shapes(), c.seed)

    @property
    def slots(self) -> tuple[int, ...]:
        """View slots this architecture reads."""
        arch = self.config.arch
        if arch is Arch.TEXT_ONLY:
            return (0,)
        if arch is Arch.IMAGE_ONLY:
            return (1,)
        if arch is Arch.EARLY_FUSION:
            return (0, 1)
        return tuple(range(N_VIEWS))

    def encoder(self, slot: int):
        if slot in IMAGE_SLOTS:
            return self.image_enc
        return self.caption_enc if slot == 4 else self.text_enc

    def _encoders(self) -> list:
        out = []
        for slot in self.slots:
            enc = self.encoder(slot)
            if all(enc is not e for e in out):
                out.append(enc)
        return out

    def head_input_dim(self) -> int:
        return 2 * self.config.d if self.config.arch is Arch.EARLY_FUSION else self.config.d

    def param_shapes(self) -> dict:
        c = self.config
        shapes = {}
        for enc in self._encoders():
            shapes.update(enc.param_shapes())
        if c.arch is Arch.MULTIVIEW_SELF_CROSS:
            for layer in range(c.self_layers):
                shapes.update(attention_shapes(f"self{layer}", c.d))
        if c.arch.multiview:
            shapes.update(linear_shapes("fuse", 2 * c.d, c.d))
            shapes.update(attention_shapes("cross", c.d))
        shapes.update(linear_shapes("head.hidden", self.head_input_dim(), c.hidden_dim))
        shapes.update(linear_shapes("head.out", c.hidden_dim, c.n_classes))
        return shapes

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    # ------------------------------------------------------------------ featurize

    def _prepare(self, slot: int, view):
        if slot in IMAGE_SLOTS:
            s = self.config.image_size
            return resize(view, s, s)
        return view

    def featurize(self, bundles) -> ViewFeatures:
        bundles = list(bundles)
        if not bundles:
            raise ValueError("featurize needs at least one bundle")
        presence = np.array([b.presence for b in bundles], dtype=bool)
        feats = []
        for slot in range(N_VIEWS):
            enc = self.encoder(slot)
            width = enc.n_features if slot in IMAGE_SLOTS else (
                enc.backend.dim if isinstance(enc, ExternalEncoder) else enc.n_buckets)
            rows = np.zeros((len(bundles), width))
            if slot in self.slots:
                for i, b in enumerate(bundles):
                    if b.presence[slot]:
                        rows[i] = enc.featurize_one(self._prepare(slot, b.views[slot]))
            feats.append(rows)
        labels = None
        if all(b.label is not None for b in bundles):
            labels = np.array([label_index(b.label) for b in bundles], dtype=int)
        return ViewFeatures(feats, presence, labels, tuple(b.sample_id for b in bundles))

    # ------------------------------------------------------------------ forward

    def encode(self, vf: ViewFeatures):
        """(B, 5, d) view embeddings, zero for absent or unread slots."""
        B = len(vf)
        E = np.zeros((B, N_VIEWS, self.config.d))
        caches = {}
        for slot in self.slots:
            out, cache = self.encoder(slot).forward(self.params, vf.feats[slot])
            E[:, slot] = np.where(vf.presence[:, slot, None], out, 0.0)
            caches[slot] = cache
        return E, caches

    def _head(self, x):
        pre, _ = linear(self.params, "head.hidden", x)
        h = np.tanh(pre)
        logits, _ = linear(self.params, "head.out", h)
        return logits, {"x": x, "h": h}

    def forward_from_embeddings(self, E: np.ndarray, presence: np.ndarray):
        """Logits from precomputed (B, 5, d) view embeddings and (B, 5) presence."""
        c = self.config
        presence = np.asarray(presence, dtype=bool)
        if not presence[:, :2].all():
            raise ValueError("original text and image must be present in every row")
        cache = {"E": E, "presence": presence}
        if c.arch is Arch.TEXT_ONLY:
            x = E[:, 0]
        elif c.arch is Arch.IMAGE_ONLY:
            x = E[:, 1]
        elif c.arch is Arch.EARLY_FUSION:
            x = np.concatenate([E[:, 0], E[:, 1]], axis=1)
        else:
            mask = presence
            Z = E
            self_caches = []
            if c.arch is Arch.MULTIVIEW_SELF_CROSS:
                for layer in range(c.self_layers):
                    att, sc = multi_head_attention(self.params, f"self{layer}", Z, Z, mask, c.heads)
                    self_caches.append(sc)
                    Z = Z + att
            fused = np.concatenate([E[:, 0], E[:, 1]], axis=1)
            q, _ = linear(self.params, "fuse", fused)
            att, cc = multi_head_attention(self.params, "cross", q[:, None, :], Z, mask, c.heads)
            x = q + att[:, 0]
            cache.update(self_caches=self_caches, cross=cc, fused=fused)
        logits, head_cache = self._head(x)
        cache["head"] = head_cache
        return logits, cache

    def forward(self, vf: ViewFeatures):
        E, enc_caches = self.encode(vf)
        logits, cache = self.forward_from_embeddings(E, vf.presence)
        cache["encoders"] = enc_caches
        return logits, cache

    def logits(self, bundles) -> np.ndarray:
        return self.forward(self.featurize(bundles))[0]

    def predict(self, bundles) -> np.ndarray:
        # np.argmax returns the first maximum: ties go to the lowest class index.
        return np.argmax(self.logits(bundles), axis=1)

    # ------------------------------------------------------------------ backward

    def backward_to_embeddings(self, cache: dict, dlogits: np.ndarray):
        """Returns (dE, grads) for everything after the encoders."""
        c = self.config
        p = self.params
        hc = cache["head"]
        dh, grads = linear_backward(p, "head.out", hc["h"], dlogits)
        dx, g = linear_backward(p, "head.hidden", hc["x"], tanh_backward(hc["h"], dh))
        grads.update(g)

        dE = np.zeros_like(cache["E"])
        if c.arch is Arch.TEXT_ONLY:
            dE[:, 0] = dx
        elif c.arch is Arch.IMAGE_ONLY:
            dE[:, 1] = dx
        elif c.arch is Arch.EARLY_FUSION:
            dE[:, 0] = dx[:, :c.d]
            dE[:, 1] = dx[:, c.d:]
        else:
            dxq, dZ, g = multi_head_attention_backward(p, "cross", cache["cross"], dx[:, None, :])
            grads.update(g)
            dq = dx + dxq[:, 0]
            dfused, g = linear_backward(p, "fuse", cache["fused"], dq)
            grads.update(g)
            for layer in reversed(range(len(cache["self_caches"]))):
                dxq, dxkv, g = multi_head_attention_backward(p, f"self{layer}", cache["self_caches"][layer], dZ)
                grads.update(g)
                dZ = dZ + dxq + dxkv
            dE = dZ.copy()
            dE[:, 0] += dfused[:, :c.d]
            dE[:, 1] += dfused[:, c.d:]
        return dE, grads

    def backward(self, cache: dict, dlogits: np.ndarray) -> dict:
        dE, grads = self.backward_to_embeddings(cache, dlogits)
        presence = cache["presence"]
        for name in self.params:
            grads.setdefault(name, None)
        for slot in self.slots:
            dout = np.where(presence[:, slot, None], dE[:, slot], 0.0)
            for name, g in self.encoder(slot).backward(self.params, cache["encoders"][slot], dout).items():
                grads[name] = g if grads[name] is None else grads[name] + g
        return {name: (np.zeros_like(self.params[name]) if g is None else g) for name, g in grads.items()}

    # ------------------------------------------------------------------ state

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict):
        expected = {k: v.shape for k, v in self.params.items()}
        got = {k: np.shape(v) for k, v in params.items()}
        if expected != got:
            missing = sorted(set(expected) - set(got))
            extra = sorted(set(got) - set(expected))
            wrong = sorted(k for k in set(expected) & set(got) if expected[k] != got[k])
            raise ConfigError(f"parameter mismatch: missing={missing} unexpected={extra} shape={wrong}")
        self.params = {k: np.asarray(params[k], dtype=np.float64).copy() for k in expected}

    def close(self):
        """Release the embedder backend of a plugin text encoder, if any."""
        close = getattr(getattr(self.text_enc, "backend", None), "close", None)
        if close is not None:
            close()


def forward_early_fusion(bundle: ViewBundle, model: FusionModel) -> np.ndarray:
    """Logits (5,) of an early-fusion model for one bundle."""
    if model.config.arch is not Arch.EARLY_FUSION:
        raise ConfigError(f"model is {model.config.arch}, not early_fusion")
    return model.logits([bundle])[0]


def forward_multiview(bundle: ViewBundle, model: FusionModel, config: FusionConfig | None = None) -> np.ndarray:
    """Logits (5,) of a multi-view model for one bundle; absent views are masked out."""
    config = config or model.config
    if config != model.config:
        raise ConfigError("config does not match the model it is applied to")
    if not config.arch.multiview:
        raise ConfigError(f"model is {config.arch}, not a multi-view architecture")
    return model.logits([bundle])[0]


def loss_and_gradients(model: FusionModel, batch: ViewFeatures):
    """Mean cross-entropy of the batch and the analytic gradient of every parameter."""
    if batch.labels is None:
        raise ValueError("gradients need labelled bundles")
    logits, cache = model.forward(batch)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    loss, dlogits = softmax_cross_entropy(logits, batch.labels)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")
    grads = model.backward(cache, dlogits)
    return loss, grads


def gradients(model: FusionModel, batch: ViewFeatures) -> dict[str, np.ndarray]:
    return loss_and_gradients(model, batch)[1]


def _first_accepted(records, methods):
    for r in records:
        if r.accepted and r.method in methods:
            return r
    return None


def build_view_bundles(originals, records, image_source) -> list[ViewBundle]:
    """
    One training bundle per original sample.

    aug_text   first accepted back_translation / paraphrase child (or a paired child's text)
    aug_image  first accepted real_guidance / diffusemix child (or a paired child's image)
    caption    caption of the first accepted caption_concat record
    Missing views stay absent.
    """
    by_parent: dict[str, list] = {}
    for r in records:
        by_parent.setdefault(r.parent_id, []).append(r)

    bundles = []
    for s in originals:
        if s.is_augmented:
            continue
        children = by_parent.get(s.sample_id, [])
        paired = _first_accepted(children, (AugMethod.PAIRED,))
        text_rec = _first_accepted(children, (AugMethod.BACK_TRANSLATION, AugMethod.PARAPHRASE))
        image_rec = _first_accepted(children, (AugMethod.REAL_GUIDANCE, AugMethod.DIFFUSEMIX))
        caption_rec = _first_accepted(children, (AugMethod.CAPTION_CONCAT,))

        aug_text = text_rec.new_sample.tweet_text if text_rec else None
        aug_image = image_source(image_rec.new_sample) if image_rec else None
        if paired is not None:
            aug_text = aug_text or paired.new_sample.tweet_text
            if aug_image is None:
                aug_image = image_source(paired.new_sample)
        caption = caption_rec.params.get("caption") if caption_rec else None

        bundles.append(ViewBundle.from_pair(
            s.tweet_text, image_source(s), s.label, s.sample_id,
            aug_text=aug_text, aug_image=aug_image, caption=caption,
        ))
    return bundles
