"""Screen calibration: target grid generation, pupil-to-screen mapping, and
angular error evaluation.

The mapping is a per-axis least-squares fit over the quadratic basis
[1, px, py, px*py, px^2, py^2]; errors are expressed in visual degrees from
the monitor's physical geometry (diagonal, resolution, viewing distance).
"""

from __future__ import annotations

import colorsys
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .dataset import round_half_up
from .errors import (GridOverflow, InsufficientSamples, MissingTarget,
                     RankDeficient, TooFewPoints)

GRID_ROWS = 4
GRID_COLS = 5
TARGET_COUNT = GRID_ROWS * GRID_COLS
SQUARE_AREA_MM2 = 780.0  # 7.8 cm^2
DEFAULT_DWELL_S = 5.0
DEFAULT_SETTLE_S = 0.5
MIN_FIXATION_SAMPLES = 5


@dataclass(frozen=True)
class ScreenGeometry:
    """Physical monitor model: 22-in diagonal, 1366x768, viewed from 500 mm."""

    diagonal_mm: float = 558.8
    resolution: Tuple[int, int] = (1366, 768)
    viewing_distance_mm: float = 500.0

    def __post_init__(self):
        if self.diagonal_mm <= 0 or self.viewing_distance_mm <= 0:
            raise ValueError("geometry lengths must be positive")
        if self.resolution[0] < 1 or self.resolution[1] < 1:
            raise ValueError("resolution must be at least 1x1")

    @property
    def pixel_pitch(self) -> float:
        return pixel_pitch(self)


def pixel_pitch(geometry: ScreenGeometry) -> float:
    """Millimeters per pixel: physical width over horizontal resolution.

    width = diagonal * hres / sqrt(hres^2 + vres^2), assuming square pixels;
    the vertical computation lands on the identical value.
    """
    hres, vres = geometry.resolution
    width = geometry.diagonal_mm * hres / math.hypot(hres, vres)
    return width / hres


@dataclass(frozen=True)
class CalibrationTarget:
    """One bright square in the 4x5 fixation grid."""

    index: int  # 1..20, row-major
    row: int  # 1..4
    col: int  # 1..5
    center: Tuple[int, int]
    square_side: int
    color: Tuple[int, int, int]
    dwell: float = DEFAULT_DWELL_S


def square_side_px(geometry: ScreenGeometry) -> int:
    """Side of a 7.8 cm^2 square at this screen's pixel pitch."""
    side_mm = math.sqrt(SQUARE_AREA_MM2)
    return round_half_up(side_mm / pixel_pitch(geometry))


def _target_color(index: int) -> Tuple[int, int, int]:
    hue = (index - 1) / TARGET_COUNT
    r, g, b = colorsys.hsv_to_rgb(hue, 1.0, 1.0)
    return (round_half_up(r * 255), round_half_up(g * 255), round_half_up(b * 255))


def calibration_targets(geometry: ScreenGeometry = ScreenGeometry(),
                        dwell: float = DEFAULT_DWELL_S) -> List[CalibrationTarget]:
    """Lay out 20 squares on a cell-centered 4x5 grid with equal margins."""
    width, height = geometry.resolution
    side = square_side_px(geometry)
    targets = []
    for row in range(1, GRID_ROWS + 1):
        for col in range(1, GRID_COLS + 1):
            cx = round_half_up((col - 0.5) * width / GRID_COLS)
            cy = round_half_up((row - 0.5) * height / GRID_ROWS)
            if (cx - side / 2 < 0 or cx + side / 2 > width
                    or cy - side / 2 < 0 or cy + side / 2 > height):
                raise GridOverflow(
                    f"square side {side} px does not fit at grid cell ({row},{col}) "
                    f"on a {width}x{height} screen")
            index = (row - 1) * GRID_COLS + col
            targets.append(CalibrationTarget(
                index=index, row=row, col=col, center=(cx, cy),
                square_side=side, color=_target_color(index), dwell=dwell))
    return targets


@dataclass
class GazeSample:
    """One timestamped pupil observation, optionally tied to a target."""

    px: float
    py: float
    t: int  # milliseconds
    target: Optional[int] = None
    conf: float = 1.0


def aggregate_fixation(samples: Sequence[GazeSample],
                       settle: float = DEFAULT_SETTLE_S) -> Tuple[float, float]:
    """Coordinate-wise median of one target's samples after the settle window."""
    if not samples:
        raise InsufficientSamples("no samples for target")
    t0 = samples[0].t
    kept = [s for s in samples if s.t - t0 >= settle * 1000.0]
    if len(kept) < MIN_FIXATION_SAMPLES:
        raise InsufficientSamples(
            f"{len(kept)} samples after the {settle}s settle window, "
            f"need >= {MIN_FIXATION_SAMPLES}")
    xs = np.array([s.px for s in kept])
    ys = np.array([s.py for s in kept])
    return float(np.median(xs)), float(np.median(ys))


def quadratic_basis(px: float, py: float) -> np.ndarray:
    return np.array([1.0, px, py, px * py, px * px, py * py])


@dataclass
class CalibrationModel:
    """Per-axis quadratic coefficients plus fit residuals and geometry."""

    coef_x: np.ndarray
    coef_y: np.ndarray
    rms_x: float
    rms_y: float
    geometry: ScreenGeometry = field(default_factory=ScreenGeometry)

    @property
    def residual_rms(self) -> float:
        return math.hypot(self.rms_x, self.rms_y)


class GazePoint(NamedTuple):
    sx: float
    sy: float
    on_screen: bool


def fit_mapping(pupil_points: Sequence[Tuple[float, float]],
                screen_points: Sequence[Tuple[float, float]],
                geometry: ScreenGeometry = ScreenGeometry()) -> CalibrationModel:
    """Least-squares fit of the quadratic basis onto screen coordinates."""
    if len(pupil_points) != len(screen_points):
        raise TooFewPoints(f"point lists differ: {len(pupil_points)} pupil vs "
                           f"{len(screen_points)} screen")
    if len(pupil_points) < 6:
        raise TooFewPoints(f"need >= 6 points, got {len(pupil_points)}")
    basis = np.array([quadratic_basis(px, py) for px, py in pupil_points])
    if np.linalg.matrix_rank(basis) < 6:
        raise RankDeficient("basis matrix is rank deficient; "
                            "fixation points are degenerate")
    screen = np.asarray(screen_points, dtype=np.float64)
    coef, _, _, _ = np.linalg.lstsq(basis, screen, rcond=None)
    fitted = basis @ coef
    resid = screen - fitted
    rms_x = float(np.sqrt(np.mean(resid[:, 0] ** 2)))
    rms_y = float(np.sqrt(np.mean(resid[:, 1] ** 2)))
    return CalibrationModel(coef_x=coef[:, 0], coef_y=coef[:, 1],
                            rms_x=rms_x, rms_y=rms_y, geometry=geometry)


def map_gaze(model: CalibrationModel, pupil: Tuple[float, float]) -> GazePoint:
    """Evaluate the fitted mapping; no clamping, off-screen results flagged."""
    b = quadratic_basis(pupil[0], pupil[1])
    sx = float(b @ model.coef_x)
    sy = float(b @ model.coef_y)
    width, height = model.geometry.resolution
    return GazePoint(sx, sy, 0.0 <= sx < width and 0.0 <= sy < height)


def pixels_to_degrees(offset, geometry: ScreenGeometry = ScreenGeometry()) -> float:
    """Angular size of a screen-pixel offset at the viewing distance."""
    if np.isscalar(offset):
        magnitude = abs(float(offset))
    else:
        magnitude = float(np.linalg.norm(np.asarray(offset, dtype=np.float64)))
    chord_mm = magnitude * pixel_pitch(geometry)
    return math.degrees(math.atan(chord_mm / geometry.viewing_distance_mm))


@dataclass
class ErrorGrid:
    """Per-target mean angular errors on the 4x5 layout."""

    cells: np.ndarray  # (4, 5) degrees

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.shape != (GRID_ROWS, GRID_COLS):
            raise ValueError(f"grid must be {GRID_ROWS}x{GRID_COLS}, "
                             f"got {self.cells.shape}")

    @property
    def mean_deg(self) -> float:
        return float(self.cells.mean())

    def rounded_cells(self) -> np.ndarray:
        return np.vectorize(round_half_up)(self.cells).astype(int)

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(f"{v:.6f}" for v in row) for row in self.cells]
        lines.append(f"mean_deg,{self.mean_deg:.6f}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def evaluate_grid(estimates: Dict[int, Sequence[Tuple[float, float]]],
                  targets: Sequence[CalibrationTarget],
                  geometry: ScreenGeometry = ScreenGeometry()) -> ErrorGrid:
    """Mean angular error per target across its trials, on the 4x5 grid."""
    cells = np.zeros((GRID_ROWS, GRID_COLS))
    for target in targets:
        trials = estimates.get(target.index)
        if not trials:
            raise MissingTarget(f"no trials for target {target.index}")
        errs = [pixels_to_degrees((sx - target.center[0], sy - target.center[1]),
                                  geometry) for sx, sy in trials]
        cells[target.row - 1, target.col - 1] = sum(errs) / len(errs)
    return ErrorGrid(cells)


def write_session(path: str | Path, samples: Iterable[GazeSample]) -> None:
    """Append-free session dump: one JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps({"t": s.t, "px": s.px, "py": s.py,
                                 "target": s.target, "conf": s.conf}) + "\n")


def read_session(path: str | Path) -> List[GazeSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            samples.append(GazeSample(px=float(obj["px"]), py=float(obj["py"]),
                                      t=int(obj["t"]), target=obj.get("target"),
                                      conf=float(obj.get("conf", 1.0))))
    return samples


def save_model(path: str | Path, model: CalibrationModel) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "coef_x": [float(v) for v in model.coef_x],
        "coef_y": [float(v) for v in model.coef_y],
        "rms_x": model.rms_x,
        "rms_y": model.rms_y,
        "geometry": {
            "diagonal_mm": model.geometry.diagonal_mm,
            "resolution": list(model.geometry.resolution),
            "viewing_distance_mm": model.geometry.viewing_distance_mm,
        },
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> CalibrationModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    geo = doc["geometry"]
    geometry = ScreenGeometry(diagonal_mm=geo["diagonal_mm"],
                              resolution=tuple(geo["resolution"]),
                              viewing_distance_mm=geo["viewing_distance_mm"])
    return CalibrationModel(coef_x=np.array(doc["coef_x"], dtype=np.float64),
                            coef_y=np.array(doc["coef_y"], dtype=np.float64),
                            rms_x=float(doc["rms_x"]), rms_y=float(doc["rms_y"]),
                            geometry=geometry)
