"""Image file IO.

Every in-memory raster in this package is RGB uint8; conversion to and from
OpenCV's BGR happens only here, at the file boundary.
"""

from __future__ import annotations

import base64
from pathlib import Path

import cv2
import numpy as np

from .errors import MissingImage


def read_rgb(path: str | Path) -> np.ndarray:
    """Read an image file as an H x W x 3 uint8 RGB array."""
    data = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if data is None:
        raise MissingImage(f"cannot read image: {path}")
    return data[:, :, ::-1].copy()


def write_rgb(path: str | Path, pixels: np.ndarray) -> None:
    """Write an RGB uint8 array to an image file (format from the extension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ok = cv2.imwrite(str(path), np.asarray(pixels)[:, :, ::-1])
    if not ok:
        raise IOError(f"cannot write image: {path}")


def encode_jpeg_base64(pixels: np.ndarray, quality: int = 80) -> str:
    """Encode an RGB array as base64 JPEG for preview messages."""
    ok, buf = cv2.imencode(".jpg", np.asarray(pixels)[:, :, ::-1],
                           [cv2.IMWRITE_JPEG_QUALITY, int(quality)])
    if not ok:
        raise IOError("JPEG encoding failed")
    return base64.b64encode(buf.tobytes()).decode("ascii")


def write_mask_png(path: str | Path, mask: np.ndarray) -> None:
    """Dump a boolean mask as a black/white PNG (debug aid)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cv2.imwrite(str(path), (np.asarray(mask, dtype=np.uint8) * 255))
