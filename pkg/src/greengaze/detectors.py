"""Pluggable face and landmark detector backends.

The pipeline consumes detectors through two small interfaces so pretrained
model files (Haar cascade, 68-landmark regressor) stay external and tests can
inject deterministic fakes. Model files are configured, never bundled.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence, Tuple

import cv2
import numpy as np

from .errors import LandmarkFailure, MissingModelFile

Box = Tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive-exclusive


class FaceDetector(Protocol):
    def detect(self, pixels: np.ndarray) -> Sequence[Box]:
        """Return candidate face boxes for an RGB frame."""
        ...


class LandmarkPredictor(Protocol):
    def predict(self, pixels: np.ndarray, face: Box) -> np.ndarray:
        """Return an (N, 2) array of landmark points in frame coordinates."""
        ...


class HaarFaceDetector:
    """Face detection through an OpenCV Haar cascade model file."""

    def __init__(self, model_path: str | Path):
        path = Path(model_path)
        if not path.is_file():
            raise MissingModelFile(f"cascade file not found: {path}")
        if not hasattr(cv2, "CascadeClassifier"):
            raise MissingModelFile(
                "this OpenCV build has no CascadeClassifier support; "
                "install opencv-python with objdetect cascades to use the Haar backend")
        self._cascade = cv2.CascadeClassifier()
        if not self._cascade.load(str(path)):
            raise MissingModelFile(f"cannot load cascade model: {path}")

    def detect(self, pixels: np.ndarray) -> Sequence[Box]:
        gray = cv2.cvtColor(pixels, cv2.COLOR_RGB2GRAY)
        found = self._cascade.detectMultiScale(gray, scaleFactor=1.1, minNeighbors=5)
        return [(int(x), int(y), int(x + w), int(y + h)) for x, y, w, h in found]


class DlibLandmarkPredictor:
    """68-point landmark prediction through a dlib shape-predictor model file."""

    def __init__(self, model_path: str | Path):
        path = Path(model_path)
        if not path.is_file():
            raise MissingModelFile(f"landmark model not found: {path}")
        try:
            import dlib
        except ImportError as exc:
            raise MissingModelFile(
                "dlib is not installed; install it to use the landmark backend") from exc
        try:
            self._predictor = dlib.shape_predictor(str(path))
            self._dlib = dlib
        except Exception as exc:
            raise MissingModelFile(f"cannot load landmark model: {path}") from exc

    def predict(self, pixels: np.ndarray, face: Box) -> np.ndarray:
        rect = self._dlib.rectangle(face[0], face[1], face[2], face[3])
        shape = self._predictor(pixels, rect)
        pts = np.array([(p.x, p.y) for p in shape.parts()], dtype=np.float64)
        if pts.shape[0] < 68:
            raise LandmarkFailure(f"predictor returned {pts.shape[0]} points")
        return pts


class StaticDetector:
    """Fixed-output detector for replay and headless testing.

    Returns one configured face box and a configured 68-point layout,
    regardless of frame content.
    """

    def __init__(self, face_box: Box, landmarks: np.ndarray):
        self.face_box = tuple(int(v) for v in face_box)
        self.landmarks = np.asarray(landmarks, dtype=np.float64)

    def detect(self, pixels: np.ndarray) -> Sequence[Box]:
        return [self.face_box]

    def predict(self, pixels: np.ndarray, face: Box) -> np.ndarray:
        return self.landmarks.copy()
