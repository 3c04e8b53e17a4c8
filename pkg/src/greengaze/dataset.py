"""Eye-crop dataset construction: frames in, two 400x300 training domains out.

Domain A holds raw eye crops, domain B holds the same kind of crop with the
pupil painted in a green-dominant marker color. The two domains are unpaired;
only domain B carries a labels table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import cv2
import numpy as np

from .detectors import FaceDetector, LandmarkPredictor
from .errors import (DegenerateRegion, DuplicateFilename, InvalidLabel,
                     LandmarkFailure, MalformedRow, MissingImage)
from .imio import read_rgb, write_rgb

EYE_WIDTH = 400
EYE_HEIGHT = 300
EYE_POINT_RANGE = (36, 42)  # landmark indices of one eye contour, half-open
DEFAULT_PAD = 30
DEFAULT_RADIUS = 12
DEFAULT_SOURCE_SIZE = (1280, 720)


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves away from zero toward +inf."""
    return int(math.floor(value + 0.5))


@dataclass
class Frame:
    """One RGB camera frame. Channel order is RGB everywhere in memory."""

    pixels: np.ndarray
    source_id: str = ""
    timestamp: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"frame must be HxWx3, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class RegionBox(NamedTuple):
    """Axis-aligned pixel box, inclusive-exclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def area(self) -> int:
        return max(0, self.x1 - self.x0) * max(0, self.y1 - self.y0)


@dataclass
class MarkerColor:
    """Pupil marker color; must be green-dominant so it cannot occur in a
    natural eye crop."""

    r: int = 45
    g: int = 253
    b: int = 9

    def __post_init__(self):
        for v in (self.r, self.g, self.b):
            if not 0 <= v <= 255:
                raise ValueError(f"channel out of range: {self!r}")
        if not (self.g > self.r and self.g > self.b):
            raise ValueError(f"marker color must be green-dominant: {self!r}")

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.r, self.g, self.b)


DEFAULT_MARKER = MarkerColor()


@dataclass
class EyeImage:
    """A 400x300 RGB eye crop with its provenance."""

    pixels: np.ndarray
    provenance: str = "raw"  # raw | labeled | translated

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (EYE_HEIGHT, EYE_WIDTH, 3):
            raise ValueError(
                f"eye image must be {EYE_HEIGHT}x{EYE_WIDTH}x3, got {self.pixels.shape}")
        if self.provenance not in ("raw", "labeled", "translated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass
class PupilLabel:
    """Pupil disk in eye-image coordinates (sub-pixel center allowed)."""

    cx: float
    cy: float
    radius: int = DEFAULT_RADIUS


class LabelRow(NamedTuple):
    """One labels.csv row: the painted disk for a domain-B file."""

    filename: str
    cx: int
    cy: int
    radius: int


@dataclass
class DatasetPair:
    """The two training domains plus domain B's labels table."""

    root: Path
    domain_a: List[Path] = field(default_factory=list)
    domain_b: List[Path] = field(default_factory=list)
    labels: List[LabelRow] = field(default_factory=list)


class RowError(NamedTuple):
    row_index: int
    filename: str
    reason: str


@dataclass
class ConversionReport:
    """Outcome of a dataset conversion: the pair plus per-row failures."""

    pair: DatasetPair
    errors: List[RowError] = field(default_factory=list)

    @property
    def converted(self) -> int:
        return len(self.pair.labels)


def detect_face(frame: Frame, detector: FaceDetector) -> Optional[RegionBox]:
    """Run the pluggable face detector; return the largest face box or None."""
    boxes = detector.detect(frame.pixels)
    if not boxes:
        return None
    best = max(boxes, key=lambda b: (b[2] - b[0]) * (b[3] - b[1]))
    return RegionBox(*best)


def locate_eye_landmarks(frame: Frame, face: RegionBox,
                         predictor: LandmarkPredictor) -> np.ndarray:
    """Predict the 68-point landmark set inside a face box, frame coords."""
    x0, y0, x1, y1 = face
    if not (0 <= x0 < x1 <= frame.width and 0 <= y0 < y1 <= frame.height):
        raise LandmarkFailure(f"face box {tuple(face)} outside frame bounds "
                              f"{frame.width}x{frame.height}")
    points = np.asarray(predictor.predict(frame.pixels, face), dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 68 or points.shape[1] != 2:
        raise LandmarkFailure(f"predictor returned shape {points.shape}, need (68, 2)")
    return points[:68]


def eye_region_box(landmarks: np.ndarray, pad: int = DEFAULT_PAD,
                   bounds: Tuple[int, int] = (0, 0)) -> RegionBox:
    """Bounding box of eye points 36-41 padded on every side, clamped to
    (width, height) bounds."""
    lo, hi = EYE_POINT_RANGE
    eye = np.asarray(landmarks, dtype=np.float64)[lo:hi]
    x0 = int(math.floor(eye[:, 0].min())) - pad
    y0 = int(math.floor(eye[:, 1].min())) - pad
    x1 = int(math.ceil(eye[:, 0].max())) + pad
    y1 = int(math.ceil(eye[:, 1].max())) + pad
    width, height = bounds
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(width, x1), min(height, y1)
    if x0 >= x1 or y0 >= y1:
        raise DegenerateRegion(f"eye box has no area after clamping to {width}x{height}")
    return RegionBox(x0, y0, x1, y1)


def crop_resize(frame: Frame, box: RegionBox) -> EyeImage:
    """Crop a frame region and resample it to 400x300 with bilinear filtering."""
    x0, y0, x1, y1 = box
    if box.area == 0 or x0 < 0 or y0 < 0 or x1 > frame.width or y1 > frame.height:
        raise DegenerateRegion(f"box {tuple(box)} invalid for frame "
                               f"{frame.width}x{frame.height}")
    crop = frame.pixels[y0:y1, x0:x1]
    resized = cv2.resize(crop, (EYE_WIDTH, EYE_HEIGHT), interpolation=cv2.INTER_LINEAR)
    return EyeImage(resized, provenance="raw")


def paint_pupil(image: EyeImage, label: PupilLabel,
                color: MarkerColor = DEFAULT_MARKER) -> EyeImage:
    """Paint the exact pixel disk (x-cx)^2 + (y-cy)^2 <= r^2 in the marker
    color; every pixel outside the disk is untouched."""
    if label.radius < 1:
        raise InvalidLabel(f"radius must be >= 1, got {label.radius}")
    cx = round_half_up(label.cx)
    cy = round_half_up(label.cy)
    ys, xs = np.ogrid[:EYE_HEIGHT, :EYE_WIDTH]
    disk = (xs - cx) ** 2 + (ys - cy) ** 2 <= label.radius ** 2
    if not disk.any():
        raise InvalidLabel(f"disk at ({cx},{cy}) r={label.radius} misses the canvas")
    out = image.pixels.copy()
    out[disk] = color.as_tuple()
    return EyeImage(out, provenance="labeled")


def _write_pair_dirs(root: Path) -> Tuple[Path, Path]:
    dir_a = root / "trainA"
    dir_b = root / "trainB"
    dir_a.mkdir(parents=True, exist_ok=True)
    dir_b.mkdir(parents=True, exist_ok=True)
    return dir_a, dir_b


def _write_labels_csv(path: Path, labels: Sequence[LabelRow]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["filename", "cx", "cy", "radius"])
        for row in labels:
            writer.writerow([row.filename, row.cx, row.cy, row.radius])


def _read_labels_csv(path: Path) -> List[LabelRow]:
    rows: List[LabelRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, raw in enumerate(csv.reader(fh)):
            if not raw or (i == 0 and raw[0] == "filename"):
                continue
            if len(raw) != 4:
                raise MalformedRow(f"{path} line {i + 1}: expected 4 columns, got {len(raw)}")
            try:
                rows.append(LabelRow(raw[0], int(raw[1]), int(raw[2]), int(raw[3])))
            except ValueError as exc:
                raise MalformedRow(f"{path} line {i + 1}: {exc}") from exc
    return rows


def convert_annotated_dataset(image_dir: str | Path,
                              coords: str | Path | Iterable[Sequence],
                              out_dir: str | Path,
                              source_size: Tuple[int, int] = DEFAULT_SOURCE_SIZE,
                              radius: int = DEFAULT_RADIUS,
                              color: MarkerColor = DEFAULT_MARKER) -> ConversionReport:
    """Convert an externally annotated image set into the two training domains.

    ``coords`` is a CSV path or iterable of (filename, px, py) rows with pupil
    centers in source-image coordinates; an optional fourth column gives the
    disk radius already at 400x300 scale (default 12). Each source image is
    resized whole to 400x300 (domain A) and the rescaled center painted on a
    copy (domain B). Bad rows are reported, not fatal.
    """
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    src_w, src_h = source_size
    if isinstance(coords, (str, Path)):
        with open(coords, newline="", encoding="utf-8") as fh:
            table = [row for row in csv.reader(fh) if row]
    else:
        table = [list(row) for row in coords]
    if table and str(table[0][0]).strip().lower() == "filename":
        table = table[1:]

    dir_a, dir_b = _write_pair_dirs(out_dir)
    pair = DatasetPair(root=out_dir)
    errors: List[RowError] = []
    seen = set()
    for i, row in enumerate(table):
        name = str(row[0]) if row else ""
        try:
            if len(row) not in (3, 4):
                raise MalformedRow(f"expected 3 or 4 columns, got {len(row)}")
            try:
                px, py = float(row[1]), float(row[2])
                row_radius = int(row[3]) if len(row) == 4 else radius
            except ValueError as exc:
                raise MalformedRow(str(exc)) from exc
            if name in seen:
                raise MalformedRow("duplicate filename")
            src = read_rgb(image_dir / name)
            resized = cv2.resize(src, (EYE_WIDTH, EYE_HEIGHT),
                                 interpolation=cv2.INTER_LINEAR)
            cx = round_half_up(px * EYE_WIDTH / src_w)
            cy = round_half_up(py * EYE_HEIGHT / src_h)
            eye = EyeImage(resized, provenance="raw")
            labeled = paint_pupil(eye, PupilLabel(cx, cy, row_radius), color)
        except (MissingImage, MalformedRow, InvalidLabel) as exc:
            errors.append(RowError(i, name, str(exc)))
            continue
        seen.add(name)
        out_name = Path(name).stem + ".png"
        path_a = dir_a / out_name
        path_b = dir_b / out_name
        write_rgb(path_a, eye.pixels)
        write_rgb(path_b, labeled.pixels)
        pair.domain_a.append(path_a)
        pair.domain_b.append(path_b)
        pair.labels.append(LabelRow(out_name, cx, cy, row_radius))
    _write_labels_csv(out_dir / "labels.csv", pair.labels)
    return ConversionReport(pair=pair, errors=errors)


def build_domain_pair(raw_images: Iterable[Tuple[str, np.ndarray]],
                      labels: Iterable[Tuple[str, float, float, int]],
                      out_dir: str | Path,
                      color: MarkerColor = DEFAULT_MARKER) -> DatasetPair:
    """Write raw eye crops as domain A and painted copies of the labeled ones
    as domain B, plus labels.csv. Filenames must be unique per domain."""
    out_dir = Path(out_dir)
    dir_a, dir_b = _write_pair_dirs(out_dir)
    pair = DatasetPair(root=out_dir)
    by_name = {}
    for name, pixels in raw_images:
        if name in by_name:
            raise DuplicateFilename(f"raw image listed twice: {name}")
        by_name[name] = np.asarray(pixels, dtype=np.uint8)
        path_a = dir_a / name
        write_rgb(path_a, by_name[name])
        pair.domain_a.append(path_a)
    seen = set()
    for name, cx, cy, radius in labels:
        if name in seen:
            raise DuplicateFilename(f"label listed twice: {name}")
        seen.add(name)
        if name not in by_name:
            raise MissingImage(f"label references unknown raw image: {name}")
        eye = EyeImage(by_name[name], provenance="raw")
        labeled = paint_pupil(eye, PupilLabel(cx, cy, radius), color)
        path_b = dir_b / name
        write_rgb(path_b, labeled.pixels)
        pair.domain_b.append(path_b)
        pair.labels.append(LabelRow(name, round_half_up(cx), round_half_up(cy), radius))
    _write_labels_csv(out_dir / "labels.csv", pair.labels)
    return pair


def load_dataset_pair(root: str | Path) -> DatasetPair:
    """Read back a dataset directory written by the builders above."""
    root = Path(root)
    dir_a, dir_b = root / "trainA", root / "trainB"
    pair = DatasetPair(root=root)
    if dir_a.is_dir():
        pair.domain_a = sorted(dir_a.glob("*.png"))
    if dir_b.is_dir():
        pair.domain_b = sorted(dir_b.glob("*.png"))
    labels_path = root / "labels.csv"
    if labels_path.is_file():
        pair.labels = _read_labels_csv(labels_path)
    names = [row.filename for row in pair.labels]
    if len(names) != len(set(names)):
        raise DuplicateFilename(f"duplicate filenames in {labels_path}")
    labeled = set(names)
    for path in pair.domain_b:
        if path.name not in labeled:
            raise MalformedRow(f"domain B file without a labels row: {path.name}")
    return pair
