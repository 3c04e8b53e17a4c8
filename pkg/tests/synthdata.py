"""Synthetic fixtures shared across the tests: eye-like images, the desk-scale
overfit dataset, an embeddable face frame, and the grid-error session file."""

import math

import numpy as np

from greengaze.calibration import (ScreenGeometry, calibration_targets,
                                   pixel_pitch, write_session, GazeSample)
from greengaze.dataset import (EYE_HEIGHT, EYE_WIDTH, EyeImage, PupilLabel,
                               build_domain_pair, paint_pupil)

TABLE1_CELLS = [
    [1, 2, 1, 1, 2],
    [1, 2, 1, 2, 2],
    [1, 2, 2, 2, 3],
    [2, 1, 2, 2, 2],
]  # mean = 34/20 = 1.7 degrees


def synthetic_eye(cx, cy, pupil_radius=12):
    """A deterministic 400x300 eye-like image: flat skin, sclera ellipse,
    iris disk, dark pupil at (cx, cy). No color comes near the marker band."""
    yy, xx = np.mgrid[0:EYE_HEIGHT, 0:EYE_WIDTH].astype(np.float64)
    img = np.empty((EYE_HEIGHT, EYE_WIDTH, 3), dtype=np.float64)
    img[..., 0] = 175
    img[..., 1] = 135
    img[..., 2] = 115
    sclera = (((xx - 200) / 150) ** 2 + ((yy - 150) / 80) ** 2) <= 1.0
    img[sclera] = (228, 222, 208)
    iris = ((xx - cx) ** 2 + (yy - cy) ** 2) <= 34 ** 2
    img[iris] = (95, 112, 138)
    pupil = ((xx - cx) ** 2 + (yy - cy) ** 2) <= pupil_radius ** 2
    img[pupil] = (28, 22, 18)
    return img.astype(np.uint8)


def overfit_positions(n=16):
    xs = [145, 180, 220, 255]
    ys = [120, 140, 160, 180]
    return [(x, y) for y in ys for x in xs][:n]


def build_overfit_pair(out_dir, n=16, radius=12, color=None):
    """n paired images: domain A dark-pupil eyes, domain B the same eyes with
    the pupil painted in marker green."""
    positions = overfit_positions(n)
    raw = [(f"eye_{i:02d}.png", synthetic_eye(cx, cy, radius))
           for i, (cx, cy) in enumerate(positions)]
    labels = [(f"eye_{i:02d}.png", cx, cy, radius)
              for i, (cx, cy) in enumerate(positions)]
    kwargs = {"color": color} if color is not None else {}
    pair = build_domain_pair(raw, labels, out_dir, **kwargs)
    return pair, positions


def labeled_eye(cx, cy, radius=12):
    eye = EyeImage(synthetic_eye(cx, cy, radius), provenance="raw")
    return paint_pupil(eye, PupilLabel(cx, cy, radius))


FRAME_EYE_OFFSET = (120, 90)  # eye canvas placed here inside the 640x480 frame


def face_frame(cx, cy, pupil_radius=12, paint=False):
    """A 640x480 frame embedding one eye canvas at FRAME_EYE_OFFSET, plus the
    static face box and a 68-point landmark set whose eye points 36-41 make
    eye_region_box (pad 30) recover that exact 400x300 region."""
    ox, oy = FRAME_EYE_OFFSET
    frame = np.empty((480, 640, 3), dtype=np.uint8)
    frame[..., 0], frame[..., 1], frame[..., 2] = 170, 128, 105
    eye = labeled_eye(cx, cy, pupil_radius).pixels if paint \
        else synthetic_eye(cx, cy, pupil_radius)
    frame[oy:oy + EYE_HEIGHT, ox:ox + EYE_WIDTH] = eye
    landmarks = np.tile(np.array([[320.0, 240.0]]), (68, 1))
    # bbox of points 36-41 = (150, 120) .. (490, 360); +-30 pad -> the canvas
    eye_pts = [(150, 120), (320, 123), (490, 125),
               (490, 360), (320, 357), (150, 355)]
    for i, (x, y) in enumerate(eye_pts):
        landmarks[36 + i] = (x, y)
    face_box = (100, 70, 540, 410)
    return frame, face_box, landmarks


def write_table1_session(path, geometry=None):
    """Session whose per-sample verification reproduces the 4x5 integer cell
    grid exactly: per target, one settle sample plus six fixation samples laid
    out so the median sits on the target and the mean angular error equals the
    cell value."""
    geometry = geometry or ScreenGeometry()
    pitch = pixel_pitch(geometry)
    distance = geometry.viewing_distance_mm
    samples = []
    for target in calibration_targets(geometry):
        cell = TABLE1_CELLS[target.row - 1][target.col - 1]
        delta = math.tan(math.radians(7 * cell / 4)) * distance / pitch
        cx, cy = float(target.center[0]), float(target.center[1])
        t0 = (target.index - 1) * 7000
        points = [(cx, cy),  # settle-window sample, dropped by the fit
                  (cx, cy), (cx, cy),
                  (cx + delta, cy), (cx + delta, cy),
                  (cx - delta, cy), (cx - delta, cy)]
        for k, (px, py) in enumerate(points):
            t = t0 if k == 0 else t0 + 500 + k * 100
            samples.append(GazeSample(px=px, py=py, t=t,
                                      target=target.index, conf=1.0))
    write_session(path, samples)
    return samples
