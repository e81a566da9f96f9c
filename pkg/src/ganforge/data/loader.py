from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .dataset import Dataset
from .resize import resize_bicubic

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".pgm", ".ppm", ".pnm", ".png"}


class ImageDecodeError(ValueError):
    pass


def decode_image(path) -> np.ndarray:
    """Decode one file to C x H x W floats in [-1, 1] (C is 1 or 3)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                maxval = 65535.0 if arr.max() > 255 or im.mode.startswith("I;16") else 255.0
                arr = arr[None]
            else:
                if im.mode not in ("L", "RGB"):
                    im = im.convert("RGB") if im.mode in ("RGBA", "P", "CMYK") else im.convert("L")
                arr = np.asarray(im, dtype=np.float64)
                arr = arr[None] if arr.ndim == 2 else arr.transpose(2, 0, 1)
                maxval = 255.0
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image {path}: {exc}") from exc
    return 2.0 * arr / maxval - 1.0


def _to_channels(img: np.ndarray, channels: int) -> np.ndarray:
    if img.shape[0] == channels:
        return img
    if img.shape[0] == 1 and channels == 3:
        return np.repeat(img, 3, axis=0)
    if img.shape[0] == 3 and channels == 1:
        weights = np.array([0.299, 0.587, 0.114]).reshape(3, 1, 1)
        return (img * weights).sum(axis=0, keepdims=True)
    raise ValueError(f"cannot map {img.shape[0]} channels to {channels}")


def load_image_dir(root, channels: int | None = None, size: int = 64) -> Dataset:
    """Load ``root/<class_name>/<file>`` trees.

    Class ids follow sorted directory names and files are read in sorted
    order. ``channels=None`` keeps 3 channels if any image is colour, else 1.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"image root {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class directories under {root}")
    raw, labels = [], []
    for label, cdir in enumerate(class_dirs):
        files = sorted(p for p in cdir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            log.warning("class directory %s is empty; class kept with no samples", cdir.name)
        for f in files:
            raw.append(decode_image(f))
            labels.append(label)
    if channels is None:
        channels = 3 if any(img.shape[0] == 3 for img in raw) else 1
    images = np.zeros((len(raw), channels, size, size))
    for i, img in enumerate(raw):
        images[i] = resize_bicubic(_to_channels(img, channels), (size, size))
    return Dataset(
        np.clip(images, -1.0, 1.0),
        np.array(labels, dtype=np.int64),
        [p.name for p in class_dirs],
        provenance=f"dir:{root.name}",
        meta={"channels": channels, "resize": "bicubic a=-0.5", "size": size, "pixel_map": "2x/max-1"},
    )
