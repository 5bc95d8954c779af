"""
ImageTensor and 8-bit RGB image I/O.

Pixels live in [0, 1] as float64 with shape (H, W, 3). Decoding normalizes 8-bit RGB by
1/255; saving re-quantizes with round-half-up and writes lossless PNG.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from errors import DatasetError
from dataset.manifest import resolve_image_path


@dataclass(frozen=True, eq=False)
class ImageTensor:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"image must have shape (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def same_size(self, other: "ImageTensor") -> bool:
        return self.shape == other.shape

    def equals(self, other: "ImageTensor") -> bool:
        """Bit-exact pixel equality."""
        return self.shape == other.shape and np.array_equal(self.pixels, other.pixels)

    @classmethod
    def constant(cls, h: int, w: int, value) -> "ImageTensor":
        return cls(np.broadcast_to(np.asarray(value, dtype=np.float64), (h, w, 3)).copy())


def to_uint8(img: ImageTensor) -> np.ndarray:
    return np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> ImageTensor:
    return ImageTensor(np.asarray(arr, dtype=np.float64) / 255.0)


def load_image(path) -> ImageTensor:
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as e:
        raise DatasetError(f"unreadable image {path}: {e}") from e
    return from_uint8(arr)


def save_image(path, img: ImageTensor) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(img)).save(path, format="PNG")
    return path


class ImageStore:
    """Callable image source backed by files: sample -> ImageTensor.

    Relative image refs resolve against image_root. A missing file is a DatasetError naming
    the sample, augmented or not.
    """

    def __init__(self, image_root):
        self.image_root = Path(image_root)

    def __call__(self, sample) -> ImageTensor:
        path = resolve_image_path(sample.image_ref, self.image_root)
        if not path.exists():
            raise DatasetError(f"image for {sample.sample_id} not found: {path}")
        return load_image(path)
