"""PNG helpers. Masks are stored as 8-bit grayscale, 0 or 255."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingFile


def read_image(path) -> np.ndarray:
    """RGB or RGBA uint8 array; other modes are converted to RGB."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"image not found: {path}", str(path))
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA"):
            im = im.convert("RGB")
        return np.asarray(im).copy()


def read_mask(path) -> np.ndarray:
    """Boolean mask: any nonzero pixel (in any channel) is inside."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"mask not found: {path}", str(path))
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr.any(axis=2)
    return arr != 0


def write_image(path, image):
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise ValueError("images are written as uint8")
    Image.fromarray(arr).save(path, format="PNG")


def write_mask(path, mask):
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)).save(path, format="PNG")
