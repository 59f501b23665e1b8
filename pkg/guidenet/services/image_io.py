from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from guidenet.core.errors import ImageFormatError
from guidenet.core.tensor import Tensor

PPM_MAGIC = b"P6"


def read_pixels(path: Union[str, Path]) -> np.ndarray:
    """Raw 8-bit binary PPM as a [3, H, W] uint8 array."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic != PPM_MAGIC:
        raise ImageFormatError(f"{path}: expected binary PPM magic {PPM_MAGIC!r}, got {magic!r}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "RGB":
                raise ImageFormatError(f"{path}: expected 8-bit RGB PPM, got mode {im.mode}")
            pixels = np.asarray(im, dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as e:
        raise ImageFormatError(f"{path}: unreadable PPM ({e})") from e
    return np.ascontiguousarray(pixels.transpose(2, 0, 1))


def decode_image(path: Union[str, Path]) -> Tensor:
    """[3, H, W] tensor with values scaled to [0, 1]."""
    return Tensor(read_pixels(path) / 255.0)


def encode_image(image: Union[Tensor, np.ndarray], path: Union[str, Path]) -> None:
    """Write a [3, H, W] image (uint8, or floats in [0, 1]) as binary PPM, maxval 255."""
    pixels = image.data if isinstance(image, Tensor) else np.asarray(image)
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise ImageFormatError(f"expected a [3, H, W] image, got shape {pixels.shape}")
    if pixels.dtype != np.uint8:
        pixels = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(np.ascontiguousarray(pixels.transpose(1, 2, 0))).save(path, format="PPM")
