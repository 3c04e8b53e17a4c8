"""Command-line entry points.

Subcommands: prep, label, convert, train, finetune, infer, track,
calibrate --replay, evaluate, serve. Output is machine-parseable key=value
lines; exit codes: 0 success, 2 usage, 3 configuration, 4 data.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import calibration as calib
from .dataset import (DEFAULT_MARKER, DEFAULT_PAD, DEFAULT_RADIUS,
                      DEFAULT_SOURCE_SIZE, Frame, MarkerColor,
                      build_domain_pair, convert_annotated_dataset,
                      crop_resize, detect_face, eye_region_box,
                      load_dataset_pair, locate_eye_landmarks)
from .detectors import DlibLandmarkPredictor, HaarFaceDetector, StaticDetector
from .engine import TrainingConfig, fine_tune, load_checkpoint, train, translate
from .engine.trainer import read_loss_csv
from .errors import (ConfigError, DataError, DegenerateRegion, DomainError,
                     DuplicateFilename, EmptyDomain, GreenGazeError,
                     GridOverflow, InsufficientSamples, InvalidConfig,
                     InvalidLabel, LandmarkFailure, MalformedRow, MissingImage,
                     MissingModelFile, MissingTarget, NonFiniteLoss,
                     PipelineNotReady, PortInUse, RankDeficient, ShapeMismatch,
                     TooFewPoints, UnknownLayerName, UsageError)
from .imio import read_rgb, write_rgb
from .locator import detect_pupil
from .pipeline import (build_pipeline, evaluate_session, fit_session,
                       load_pipeline_config)

CONFIG_FAMILY = (ConfigError, InvalidConfig, MissingModelFile, GridOverflow,
                 PipelineNotReady, PortInUse)
DATA_FAMILY = (DataError, MissingImage, MalformedRow, DuplicateFilename,
               InvalidLabel, EmptyDomain, NonFiniteLoss, InsufficientSamples,
               RankDeficient, TooFewPoints, MissingTarget, LandmarkFailure,
               DegenerateRegion, ShapeMismatch, DomainError, UnknownLayerName)


def _parse_color(text: str) -> MarkerColor:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"color must be R,G,B, got {text!r}")
    try:
        return MarkerColor(*(int(p) for p in parts))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_size(text: str) -> Tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise UsageError(f"size must be WxH, got {text!r}") from exc


def _parse_geometry(text: Optional[str]) -> calib.ScreenGeometry:
    if text in (None, "default"):
        return calib.ScreenGeometry()
    path = Path(text)
    if not path.is_file():
        raise ConfigError(f"geometry file not found: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    return calib.ScreenGeometry(
        diagonal_mm=float(doc.get("diagonal_mm", 558.8)),
        resolution=tuple(doc.get("resolution", (1366, 768))),
        viewing_distance_mm=float(doc.get("viewing_distance_mm", 500.0)))


def _require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} does not exist: {p}")
    return p


def _load_detectors(args):
    if args.backend == "static":
        if not args.face_box or not args.landmarks_file:
            raise UsageError("static backend needs --face-box and --landmarks-file")
        box = tuple(int(v) for v in args.face_box.split(","))
        if len(box) != 4:
            raise UsageError("--face-box must be x0,y0,x1,y1")
        landmarks = np.loadtxt(_require_file(args.landmarks_file,
                                             "landmarks file"), delimiter=",")
        static = StaticDetector(box, landmarks)
        return static, static
    if not args.face_model or not args.landmark_model:
        raise ConfigError("haar backend needs --face-model and --landmark-model")
    return (HaarFaceDetector(_require_file(args.face_model, "face model")),
            DlibLandmarkPredictor(_require_file(args.landmark_model,
                                                "landmark model")))


def cmd_prep(args) -> int:
    frames_dir = _require_file(args.frames, "frames directory")
    detector, predictor = _load_detectors(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(list(frames_dir.glob("*.png")) + list(frames_dir.glob("*.jpg")))
    done = skipped = 0
    for path in paths:
        frame = Frame(read_rgb(path), source_id=path.name)
        face = detect_face(frame, detector)
        if face is None:
            print(f"skip={path.name} reason=no_face")
            skipped += 1
            continue
        try:
            landmarks = locate_eye_landmarks(frame, face, predictor)
            box = eye_region_box(landmarks, pad=args.pad,
                                 bounds=(frame.width, frame.height))
            eye = crop_resize(frame, box)
        except (LandmarkFailure, DegenerateRegion) as exc:
            print(f"skip={path.name} reason={type(exc).__name__}")
            skipped += 1
            continue
        write_rgb(out_dir / (path.stem + ".png"), eye.pixels)
        done += 1
    print(f"prepped={done} skipped={skipped} out={out_dir}")
    return 0


def _read_label_table(path: Path, default_radius: int) -> List[Tuple[str, float, float, int]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, raw in enumerate(csv.reader(fh)):
            if not raw or (i == 0 and raw[0].strip().lower() == "filename"):
                continue
            if len(raw) not in (3, 4):
                raise MalformedRow(f"{path} line {i + 1}: need 3 or 4 columns")
            try:
                radius = int(raw[3]) if len(raw) == 4 else default_radius
                rows.append((raw[0], float(raw[1]), float(raw[2]), radius))
            except ValueError as exc:
                raise MalformedRow(f"{path} line {i + 1}: {exc}") from exc
    return rows


def cmd_label(args) -> int:
    images_dir = _require_file(args.images, "images directory")
    labels_path = _require_file(args.labels, "labels table")
    rows = _read_label_table(labels_path, args.radius)
    color = _parse_color(args.color)
    raw_images = [(p.name, read_rgb(p)) for p in sorted(images_dir.glob("*.png"))]
    pair = build_domain_pair(raw_images, rows, args.out, color=color)
    print(f"domain_a={len(pair.domain_a)} domain_b={len(pair.domain_b)} "
          f"out={pair.root}")
    return 0


def cmd_convert(args) -> int:
    images_dir = _require_file(args.images, "images directory")
    coords_path = _require_file(args.coords, "coordinates table")
    report = convert_annotated_dataset(
        images_dir, coords_path, args.out,
        source_size=_parse_size(args.source_size),
        radius=args.radius, color=_parse_color(args.color))
    for err in report.errors:
        print(f"row={err.row_index} file={err.filename} error={err.reason}")
    print(f"converted={report.converted} errors={len(report.errors)} "
          f"out={report.pair.root}")
    return 0


def _load_training_config(path: Optional[str]) -> TrainingConfig:
    if path is None:
        return TrainingConfig()
    doc = json.loads(_require_file(path, "training config").read_text(encoding="utf-8"))
    return TrainingConfig.from_dict(doc)


def cmd_train(args) -> int:
    config = _load_training_config(args.config)
    dataset_dir = _require_file(args.dataset, "dataset directory")
    pair = load_dataset_pair(dataset_dir)
    if not pair.domain_a or not pair.domain_b:
        raise EmptyDomain(f"dataset at {dataset_dir} has an empty domain")
    result = train(pair, config, args.out, max_steps=args.max_steps)
    for report in result.reports:
        from .engine import format_log_line
        print(format_log_line(report))
    from .plotting import render_loss_curves
    png = render_loss_curves(read_loss_csv(result.losses_csv),
                             Path(args.out) / "losses.png")
    print(f"steps={result.bundle.step} checkpoints={len(result.checkpoints)} "
          f"losses_csv={result.losses_csv} losses_png={png}")
    return 0


def cmd_finetune(args) -> int:
    ckpt_dir = _require_file(args.checkpoint, "checkpoint")
    bundle = load_checkpoint(ckpt_dir)
    base = bundle.config.to_dict()
    if args.config:
        overrides = json.loads(_require_file(args.config, "training config")
                               .read_text(encoding="utf-8"))
        for key in ("ngf", "ndf", "residual_blocks"):
            if key in overrides and overrides[key] != base[key]:
                raise ConfigError(f"cannot change architecture field {key} "
                                  f"when fine-tuning")
        base.update(overrides)
    config = TrainingConfig.from_dict(base)
    bundle.config = config
    for opt in bundle.optimizers().values():
        for group in opt.param_groups:
            group["lr"] = config.learning_rate
            group["betas"] = (config.adam_beta1, 0.999)
    dataset_dir = _require_file(args.dataset, "dataset directory")
    pair = load_dataset_pair(dataset_dir)
    freeze = [p for p in (args.freeze.split(",") if args.freeze else []) if p]
    result = fine_tune(bundle, pair, freeze, config, args.out,
                       max_steps=args.max_steps)
    from .plotting import render_loss_curves
    png = render_loss_curves(read_loss_csv(result.losses_csv),
                             Path(args.out) / "losses.png")
    best = result.best["checkpoint"] if result.best else "none"
    print(f"steps={result.bundle.step} frozen={len(freeze)} best={best} "
          f"losses_png={png}")
    return 0


def cmd_infer(args) -> int:
    bundle = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    pixels = read_rgb(_require_file(args.image, "input image"))
    out_image = translate(bundle, pixels, args.direction)
    write_rgb(args.out, out_image.pixels)
    print(f"translated={args.out} direction={args.direction}")
    if args.detect:
        det = detect_pupil(out_image)
        if det is None:
            print("pupil=none")
        else:
            print(f"pupil={det.cx:.2f},{det.cy:.2f} conf={det.confidence:.3f} "
                  f"area={det.area}")
    return 0


def cmd_track(args) -> int:
    config = load_pipeline_config(_require_file(args.config, "pipeline config"))
    pipeline = build_pipeline(config)
    from .service import DirectoryFrameSource

    source = DirectoryFrameSource(_require_file(args.frames, "frames directory"),
                                  repeat=args.repeat)
    pipeline.recorder.start()
    count = 0
    for frame in source:
        if args.max_frames is not None and count >= args.max_frames:
            break
        update = pipeline.run_frame(frame)
        print(json.dumps(update.to_message()))
        count += 1
    samples = pipeline.recorder.end(args.session_out)
    print(f"frames={count} samples={len(samples)} session={args.session_out}")
    return 0


def cmd_calibrate(args) -> int:
    samples = calib.read_session(_require_file(args.replay, "session file"))
    geometry = _parse_geometry(args.geometry)
    model = fit_session(samples, geometry)
    calib.save_model(args.model_out, model)
    print(f"model={args.model_out} rms_x={model.rms_x:.6f} "
          f"rms_y={model.rms_y:.6f} samples={len(samples)}")
    return 0


def cmd_evaluate(args) -> int:
    samples = calib.read_session(_require_file(args.session, "session file"))
    geometry = _parse_geometry(args.geometry)
    if args.model:
        model = calib.load_model(_require_file(args.model, "model file"))
    else:
        model = fit_session(samples, geometry)
    grid = evaluate_session(samples, model, geometry)
    for r, row in enumerate(grid.cells, start=1):
        print(f"row{r}=" + ",".join(f"{v:g}" for v in row))
    print(f"mean_deg={grid.mean_deg:g}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        grid.to_csv(out_dir / "error_grid.csv")
        from .plotting import render_error_grid
        render_error_grid(grid, out_dir / "error_grid.png")
        print(f"grid_csv={out_dir / 'error_grid.csv'} "
              f"grid_png={out_dir / 'error_grid.png'}")
    return 0


def cmd_serve(args) -> int:
    config = load_pipeline_config(_require_file(args.config, "pipeline config"))
    pipeline = build_pipeline(config)
    from .service import (CameraFrameSource, DirectoryFrameSource,
                          TrackerService, serve)

    if args.frames:
        source = DirectoryFrameSource(_require_file(args.frames,
                                                    "frames directory"),
                                      repeat=args.repeat)
    elif args.camera:
        source = CameraFrameSource(config.camera_index)
    else:
        source = None
    service = TrackerService(pipeline, frame_source=source,
                             frame_interval=args.interval,
                             session_out=args.session_out or config.session_out,
                             model_out=args.model_out,
                             send_previews=args.previews)
    port = args.port or config.port
    print(f"serving=ws://127.0.0.1:{port}/ws")
    serve(service, port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greengaze",
        description="Green-marker eye tracking: dataset prep, translation "
                    "model training, pupil detection, calibration, tracking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="crop eye regions out of camera frames")
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=("haar", "static"), default="haar")
    p.add_argument("--face-model")
    p.add_argument("--landmark-model")
    p.add_argument("--face-box", help="x0,y0,x1,y1 for the static backend")
    p.add_argument("--landmarks-file", help="CSV of 68 x,y rows (static backend)")
    p.add_argument("--pad", type=int, default=DEFAULT_PAD)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("label", help="paint pupils to build the two domains")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    p.add_argument("--color", default="45,253,9")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("convert", help="convert an annotated external dataset")
    p.add_argument("--images", required=True)
    p.add_argument("--coords", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source-size", default=f"{DEFAULT_SOURCE_SIZE[0]}x"
                                            f"{DEFAULT_SOURCE_SIZE[1]}")
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    p.add_argument("--color", default="45,253,9")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train the translation model")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-steps", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="continue training with frozen layers")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="training config JSON overrides")
    p.add_argument("--freeze", default="",
                   help="comma-separated layer prefixes, e.g. G.initial,G.down")
    p.add_argument("--max-steps", type=int)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("infer", help="translate one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--direction", choices=("a2b", "b2a"), default="a2b")
    p.add_argument("--detect", action="store_true",
                   help="also run pupil detection on the output")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("track", help="run the live loop headless over frames")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--frames", required=True)
    p.add_argument("--session-out", default="session.jsonl")
    p.add_argument("--max-frames", type=int)
    p.add_argument("--repeat", type=int, default=1)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("calibrate", help="fit a calibration model from a session")
    p.add_argument("--replay", required=True, help="session JSONL to replay")
    p.add_argument("--geometry", default="default")
    p.add_argument("--model-out", default="calibration_model.json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="angular error grid for a session")
    p.add_argument("--session", required=True)
    p.add_argument("--model", help="calibration model JSON (fit from the "
                                   "session when omitted)")
    p.add_argument("--geometry", default="default")
    p.add_argument("--out-dir", help="write error_grid.csv and error_grid.png")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the WebSocket streaming service")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--frames", help="directory frame source")
    p.add_argument("--camera", action="store_true")
    p.add_argument("--port", type=int)
    p.add_argument("--interval", type=float, default=0.033)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--session-out")
    p.add_argument("--model-out", default="calibration_model.json")
    p.add_argument("--previews", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CONFIG_FAMILY as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except DATA_FAMILY as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    except GreenGazeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
