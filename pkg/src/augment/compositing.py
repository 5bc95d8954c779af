"""
Pure image compositing ops used by the diffusion-style augmentations.

resize(img, h, w)                         bilinear, half-pixel centres
masked_blend(original, generated, mask)   mask * original + (1 - mask) * generated
generate_fractal(seed, h, w)              escape-time Julia set, colourized
fractal_blend(hybrid, fractal, lam)       lam * hybrid + (1 - lam) * fractal

All ops return new ImageTensors with pixels in [0, 1].
"""

from dataclasses import dataclass
from enum import StrEnum

import matplotlib
import numpy as np

from dataset.images import ImageTensor

FRACTAL_RADIUS = 0.7885
FRACTAL_ITERATIONS = 64
FRACTAL_COLORMAPS = ("twilight", "viridis", "magma", "plasma", "inferno", "cividis", "turbo", "cubehelix")


class MaskStyle(StrEnum):
    LEFT_HALF   = "left_half"
    RIGHT_HALF  = "right_half"
    TOP_HALF    = "top_half"
    BOTTOM_HALF = "bottom_half"
    FULL        = "full"    # keep the original everywhere
    EMPTY       = "empty"   # take the generated image everywhere


HALF_STYLES = (MaskStyle.LEFT_HALF, MaskStyle.RIGHT_HALF, MaskStyle.TOP_HALF, MaskStyle.BOTTOM_HALF)


@dataclass(frozen=True, eq=False)
class BlendMask:
    """Binary H x W mask; 1 selects the original image."""
    values: np.ndarray
    style:  MaskStyle

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {v.shape}")
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("mask must be binary")
        object.__setattr__(self, "values", v)

    @classmethod
    def make(cls, style: MaskStyle | str, h: int, w: int) -> "BlendMask":
        style = MaskStyle(style)
        v = np.zeros((h, w))
        if style is MaskStyle.LEFT_HALF:
            v[:, : w // 2] = 1.0
        elif style is MaskStyle.RIGHT_HALF:
            v[:, w // 2:] = 1.0
        elif style is MaskStyle.TOP_HALF:
            v[: h // 2, :] = 1.0
        elif style is MaskStyle.BOTTOM_HALF:
            v[h // 2:, :] = 1.0
        elif style is MaskStyle.FULL:
            v[:] = 1.0
        return cls(v, style)


def _axis(n_in: int, n_out: int):
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize(img: ImageTensor, h: int, w: int) -> ImageTensor:
    if h < 1 or w < 1:
        raise ValueError(f"target size must be positive, got {h}x{w}")
    if img.shape == (h, w):
        return img
    px = img.pixels
    y0, y1, wy = _axis(img.height, h)
    x0, x1, wx = _axis(img.width, w)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = px[y0][:, x0] + (px[y0][:, x1] - px[y0][:, x0]) * wx
    bot = px[y1][:, x0] + (px[y1][:, x1] - px[y1][:, x0]) * wx
    return ImageTensor(np.clip(top + (bot - top) * wy, 0.0, 1.0))


def _check_same_size(a: ImageTensor, b: ImageTensor):
    if not a.same_size(b):
        raise ValueError(f"image size mismatch: {a.shape} vs {b.shape}")


def masked_blend(original: ImageTensor, generated: ImageTensor, mask: BlendMask) -> ImageTensor:
    _check_same_size(original, generated)
    m = mask.values if isinstance(mask, BlendMask) else np.asarray(mask, dtype=np.float64)
    if m.shape != original.shape:
        raise ValueError(f"mask shape {m.shape} does not match image {original.shape}")
    m = m[..., None]
    return ImageTensor(np.clip(m * original.pixels + (1.0 - m) * generated.pixels, 0.0, 1.0))


def fractal_blend(hybrid: ImageTensor, fractal: ImageTensor, lam: float) -> ImageTensor:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    _check_same_size(hybrid, fractal)
    return ImageTensor(np.clip(lam * hybrid.pixels + (1.0 - lam) * fractal.pixels, 0.0, 1.0))


def fractal_parameter(seed: int) -> complex:
    theta = 2.0 * np.pi * np.random.default_rng(seed).random()
    return FRACTAL_RADIUS * complex(np.cos(theta), np.sin(theta))


def generate_fractal(seed: int, h: int, w: int) -> ImageTensor:
    """Julia set z -> z^2 + c with c on the 0.7885 circle at a seed-derived angle.

    Escape counts are normalized to [0, 1] and mapped through a seed-chosen colormap.
    """
    if h < 1 or w < 1:
        raise ValueError(f"fractal size must be positive, got {h}x{w}")
    c = fractal_parameter(seed)
    span = 1.5
    aspect = w / h
    ys = np.linspace(-span, span, h)
    xs = np.linspace(-span * aspect, span * aspect, w)
    z = xs[None, :] + 1j * ys[:, None]
    counts = np.full(z.shape, FRACTAL_ITERATIONS, dtype=np.float64)
    alive = np.ones(z.shape, dtype=bool)
    for n in range(FRACTAL_ITERATIONS):
        z[alive] = z[alive] ** 2 + c
        escaped = alive & (np.abs(z) > 2.0)
        counts[escaped] = n
        alive &= ~escaped
    cmap = matplotlib.colormaps[FRACTAL_COLORMAPS[seed % len(FRACTAL_COLORMAPS)]]
    rgb = cmap(counts / FRACTAL_ITERATIONS)[..., :3]
    return ImageTensor(np.clip(rgb, 0.0, 1.0))
