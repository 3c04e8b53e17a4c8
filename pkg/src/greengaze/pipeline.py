"""Live-loop plumbing: pipeline configuration, the per-frame chain
(face -> landmarks -> crop -> translate -> detect -> map), session recording,
and the replayable calibrate/evaluate paths shared by the CLI and the
streaming service."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import calibration as calib
from .dataset import (DEFAULT_MARKER, Frame, MarkerColor, RegionBox,
                      crop_resize, detect_face, eye_region_box,
                      locate_eye_landmarks)
from .detectors import DlibLandmarkPredictor, HaarFaceDetector, StaticDetector
from .engine import ModelBundle, load_checkpoint, translate
from .errors import (ConfigError, DegenerateRegion, InsufficientSamples,
                     LandmarkFailure, PipelineNotReady)
from .locator import (DEFAULT_MIN_AREA, DEFAULT_TOLERANCE, MorphParams,
                      detect_pupil)

DEFAULT_PORT = 8765
PREVIEW_RATE_HZ = 10.0


@dataclass
class PipelineConfig:
    """Everything the tracker needs, loadable from one JSON file."""

    checkpoint: Optional[str] = None
    calibration_model: Optional[str] = None
    backend: str = "haar"  # haar | static
    face_model: Optional[str] = None
    landmark_model: Optional[str] = None
    static_face_box: Optional[Sequence[int]] = None
    static_landmarks: Optional[str] = None  # CSV of 68 x,y rows
    marker_color: Sequence[int] = (45, 253, 9)
    tolerance: int = DEFAULT_TOLERANCE
    min_area: int = DEFAULT_MIN_AREA
    morph: Dict = field(default_factory=lambda: {
        "element": 3, "erode_iterations": 2, "dilate_iterations": 2})
    geometry: Dict = field(default_factory=lambda: {
        "diagonal_mm": 558.8, "resolution": [1366, 768],
        "viewing_distance_mm": 500.0})
    pad: int = 30
    camera_index: int = 0
    port: int = DEFAULT_PORT
    seed: int = 0
    session_out: str = "session.jsonl"


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Read and validate a pipeline config; referenced paths must exist."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    config = PipelineConfig(**doc)
    validate_pipeline_config(config)
    return config


def validate_pipeline_config(config: PipelineConfig) -> None:
    if config.backend not in ("haar", "static"):
        raise ConfigError(f"backend must be 'haar' or 'static', got {config.backend!r}")
    for name in ("checkpoint", "calibration_model", "face_model",
                 "landmark_model", "static_landmarks"):
        value = getattr(config, name)
        if value is not None and not Path(value).exists():
            raise ConfigError(f"{name} path does not exist: {value}")
    if config.backend == "static":
        if config.static_face_box is None or config.static_landmarks is None:
            raise ConfigError("static backend needs static_face_box and "
                              "static_landmarks")
    try:
        MarkerColor(*config.marker_color)
        MorphParams(**config.morph)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if config.tolerance < 0 or config.min_area < 0 or config.pad < 0:
        raise ConfigError("tolerance, min_area and pad must be >= 0")


def geometry_from_config(config: PipelineConfig) -> calib.ScreenGeometry:
    geo = config.geometry
    return calib.ScreenGeometry(
        diagonal_mm=float(geo.get("diagonal_mm", 558.8)),
        resolution=tuple(geo.get("resolution", (1366, 768))),
        viewing_distance_mm=float(geo.get("viewing_distance_mm", 500.0)))


@dataclass
class GazeUpdate:
    """One frame's worth of tracker output."""

    seq: int
    t: int  # milliseconds
    pupil: Optional[Tuple[float, float]] = None
    conf: float = 0.0
    screen: Optional[Tuple[float, float]] = None
    on_screen: bool = False

    def to_message(self) -> Dict:
        return {
            "type": "gaze",
            "t": self.t,
            "px": None if self.pupil is None else self.pupil[0],
            "py": None if self.pupil is None else self.pupil[1],
            "conf": self.conf,
            "sx": None if self.screen is None else self.screen[0],
            "sy": None if self.screen is None else self.screen[1],
            "seq": self.seq,
        }


class SessionRecorder:
    """Accumulates target-tagged gaze samples between calib_start/calib_end."""

    def __init__(self):
        self.active = False
        self.target: Optional[int] = None
        self.samples: List[calib.GazeSample] = []

    def start(self) -> None:
        self.active = True
        self.target = None
        self.samples = []

    def set_target(self, index: Optional[int]) -> None:
        self.target = index

    def record(self, update: GazeUpdate) -> None:
        if not self.active or update.pupil is None:
            return
        self.samples.append(calib.GazeSample(
            px=update.pupil[0], py=update.pupil[1], t=update.t,
            target=self.target, conf=update.conf))

    def end(self, path: str | Path) -> List[calib.GazeSample]:
        self.active = False
        self.target = None
        calib.write_session(path, self.samples)
        return self.samples


class Pipeline:
    """Holds the loaded stages and runs the per-frame chain."""

    def __init__(self, face_detector=None, landmark_predictor=None,
                 bundle: Optional[ModelBundle] = None,
                 model: Optional[calib.CalibrationModel] = None,
                 color: MarkerColor = DEFAULT_MARKER,
                 tolerance: int = DEFAULT_TOLERANCE,
                 morph: MorphParams = MorphParams(),
                 min_area: int = DEFAULT_MIN_AREA,
                 pad: int = 30,
                 geometry: calib.ScreenGeometry = calib.ScreenGeometry()):
        self.face_detector = face_detector
        self.landmark_predictor = landmark_predictor
        self.bundle = bundle
        self.model = model
        self.color = color
        self.tolerance = tolerance
        self.morph = morph
        self.min_area = min_area
        self.pad = pad
        self.geometry = geometry
        self.seq = 0
        self.recorder = SessionRecorder()

    def run_frame(self, frame: Frame) -> GazeUpdate:
        """Full chain with graceful degradation: any stage that finds nothing
        yields a pupil-less update; the sequence number always increments."""
        if self.face_detector is None or self.landmark_predictor is None \
                or self.bundle is None:
            raise PipelineNotReady("pipeline needs a face detector, a landmark "
                                   "predictor and a loaded checkpoint")
        self.seq += 1
        update = GazeUpdate(seq=self.seq, t=frame.timestamp)
        face = detect_face(frame, self.face_detector)
        if face is None:
            self.recorder.record(update)
            return update
        try:
            landmarks = locate_eye_landmarks(frame, face, self.landmark_predictor)
            box = eye_region_box(landmarks, pad=self.pad,
                                 bounds=(frame.width, frame.height))
            eye = crop_resize(frame, box)
        except (LandmarkFailure, DegenerateRegion):
            self.recorder.record(update)
            return update
        marked = translate(self.bundle, eye, "a2b")
        detection = detect_pupil(marked, self.color, self.tolerance,
                                 self.morph, self.min_area)
        if detection is not None:
            update.pupil = (detection.cx, detection.cy)
            update.conf = detection.confidence
            if self.model is not None:
                point = calib.map_gaze(self.model, update.pupil)
                update.screen = (point.sx, point.sy)
                update.on_screen = point.on_screen
        self.recorder.record(update)
        return update


def build_pipeline(config: PipelineConfig) -> Pipeline:
    """Instantiate a Pipeline from a validated config."""
    validate_pipeline_config(config)
    if config.backend == "static":
        landmarks = np.loadtxt(config.static_landmarks, delimiter=",")
        static = StaticDetector(tuple(config.static_face_box), landmarks)
        face_detector = static
        landmark_predictor = static
    else:
        face_detector = (HaarFaceDetector(config.face_model)
                         if config.face_model else None)
        landmark_predictor = (DlibLandmarkPredictor(config.landmark_model)
                              if config.landmark_model else None)
    bundle = load_checkpoint(config.checkpoint) if config.checkpoint else None
    model = (calib.load_model(config.calibration_model)
             if config.calibration_model else None)
    return Pipeline(face_detector=face_detector,
                    landmark_predictor=landmark_predictor,
                    bundle=bundle, model=model,
                    color=MarkerColor(*config.marker_color),
                    tolerance=config.tolerance,
                    morph=MorphParams(**config.morph),
                    min_area=config.min_area,
                    pad=config.pad,
                    geometry=geometry_from_config(config))


def fit_session(samples: Sequence[calib.GazeSample],
                geometry: calib.ScreenGeometry,
                settle: float = calib.DEFAULT_SETTLE_S) -> calib.CalibrationModel:
    """Fit the pupil->screen mapping from a recorded calibration session.

    Samples are grouped by target index, each fixation reduced by the
    settle-then-median rule, and the medians regressed onto target centers.
    This single path serves both the CLI replay and the live service.
    """
    targets = calib.calibration_targets(geometry)
    by_target: Dict[int, List[calib.GazeSample]] = {}
    for sample in samples:
        if sample.target is not None:
            by_target.setdefault(int(sample.target), []).append(sample)
    pupil_points, screen_points = [], []
    for target in targets:
        group = by_target.get(target.index)
        if not group:
            continue
        pupil_points.append(calib.aggregate_fixation(group, settle=settle))
        screen_points.append(target.center)
    if len(pupil_points) < 6:
        raise InsufficientSamples(
            f"only {len(pupil_points)} targets have usable fixations, need >= 6")
    return calib.fit_mapping(pupil_points, screen_points, geometry)


def evaluate_session(samples: Sequence[calib.GazeSample],
                     model: calib.CalibrationModel,
                     geometry: calib.ScreenGeometry) -> calib.ErrorGrid:
    """Per-sample verification: every tagged sample is one measurement; its
    mapped point is compared against its target's center."""
    targets = calib.calibration_targets(geometry)
    estimates: Dict[int, List[Tuple[float, float]]] = {}
    for sample in samples:
        if sample.target is None:
            continue
        point = calib.map_gaze(model, (sample.px, sample.py))
        estimates.setdefault(int(sample.target), []).append((point.sx, point.sy))
    return calib.evaluate_grid(estimates, targets, geometry)
