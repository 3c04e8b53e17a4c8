"""Pupil recovery from a translated eye image.

Pipeline: color band threshold (inRange-style) -> binary erosion -> binary
dilation -> largest-blob centroid. Everything is pure and stateless.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np

from .dataset import DEFAULT_MARKER, EYE_HEIGHT, EYE_WIDTH, EyeImage, MarkerColor

DEFAULT_TOLERANCE = 40
DEFAULT_MIN_AREA = 20


@dataclass
class MorphParams:
    """Square structuring element and iteration counts for the cleanup pass."""

    element: int = 3
    erode_iterations: int = 2
    dilate_iterations: int = 2

    def __post_init__(self):
        if self.element < 1 or self.element % 2 == 0:
            raise ValueError(f"element side must be odd and >= 1, got {self.element}")
        if self.erode_iterations < 0 or self.dilate_iterations < 0:
            raise ValueError("iteration counts must be >= 0")

    def kernel(self) -> np.ndarray:
        return np.ones((self.element, self.element), dtype=np.uint8)


@dataclass
class PupilDetection:
    """Sub-pixel pupil position with blob area and a dominance confidence."""

    cx: float
    cy: float
    area: int
    confidence: float


def color_band_mask(image: EyeImage, color: MarkerColor = DEFAULT_MARKER,
                    tolerance: int = DEFAULT_TOLERANCE) -> np.ndarray:
    """Boolean mask of pixels whose every channel lies within +-tolerance of
    the marker color, bounds clipped to [0, 255]."""
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    target = np.array(color.as_tuple(), dtype=np.int32)
    lo = np.clip(target - tolerance, 0, 255).astype(np.uint8)
    hi = np.clip(target + tolerance, 0, 255).astype(np.uint8)
    return cv2.inRange(image.pixels, lo, hi) > 0


def erode(mask: np.ndarray, params: MorphParams = MorphParams()) -> np.ndarray:
    """Binary erosion with the square element, iterated; out-of-frame is unset."""
    if params.erode_iterations == 0:
        return mask.copy()
    raster = mask.astype(np.uint8)
    out = cv2.erode(raster, params.kernel(), iterations=params.erode_iterations,
                    borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return out > 0


def dilate(mask: np.ndarray, params: MorphParams = MorphParams()) -> np.ndarray:
    """Binary dilation with the square element, iterated; out-of-frame is unset."""
    if params.dilate_iterations == 0:
        return mask.copy()
    raster = mask.astype(np.uint8)
    out = cv2.dilate(raster, params.kernel(), iterations=params.dilate_iterations,
                     borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return out > 0


def largest_blob_centroid(mask: np.ndarray,
                          min_area: int = DEFAULT_MIN_AREA) -> Optional[PupilDetection]:
    """Centroid of the largest 8-connected component, or None when the largest
    is below min_area. Confidence is its share of all set pixels; area ties
    break toward the smaller (cy, cx) centroid."""
    total = int(mask.sum())
    if total == 0:
        return None
    count, labels = cv2.connectedComponents(mask.astype(np.uint8), connectivity=8)
    best = None  # (area, -cy, -cx) maximized == area up, centroid (y,x) down
    for lab in range(1, count):
        ys, xs = np.nonzero(labels == lab)
        area = len(xs)
        cy = float(ys.mean())
        cx = float(xs.mean())
        key = (area, -cy, -cx)
        if best is None or key > best[0]:
            best = (key, area, cx, cy)
    _, area, cx, cy = best
    if area < min_area:
        return None
    return PupilDetection(cx=cx, cy=cy, area=area, confidence=area / total)


def detect_pupil(image: EyeImage, color: MarkerColor = DEFAULT_MARKER,
                 tolerance: int = DEFAULT_TOLERANCE,
                 morph: MorphParams = MorphParams(),
                 min_area: int = DEFAULT_MIN_AREA) -> Optional[PupilDetection]:
    """Full recovery chain: band mask -> erode -> dilate -> largest centroid."""
    mask = color_band_mask(image, color, tolerance)
    mask = erode(mask, morph)
    mask = dilate(mask, morph)
    return largest_blob_centroid(mask, min_area)


def write_mask_debug(path, mask: np.ndarray) -> None:
    """Dump an intermediate mask as a PNG for inspection."""
    from .imio import write_mask_png

    write_mask_png(path, mask)
