import math

import numpy as np
import pytest

from greengaze.calibration import (DEFAULT_DWELL_S, GRID_COLS, GRID_ROWS,
                                   TARGET_COUNT, CalibrationModel, ErrorGrid,
                                   GazeSample, ScreenGeometry,
                                   aggregate_fixation, calibration_targets,
                                   evaluate_grid, fit_mapping, load_model,
                                   map_gaze, pixel_pitch, pixels_to_degrees,
                                   quadratic_basis, read_session, save_model,
                                   square_side_px, write_session)
from greengaze.errors import (GridOverflow, InsufficientSamples,
                              MissingTarget, RankDeficient, TooFewPoints)
from synthdata import TABLE1_CELLS


def identity_model(geometry=None):
    return CalibrationModel(
        coef_x=np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        coef_y=np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
        rms_x=0.0, rms_y=0.0, geometry=geometry or ScreenGeometry())


def pupil_grid():
    return [(100.0 + 50 * i, 80.0 + 35 * j)
            for j in range(4) for i in range(5)]


TRUE_COEF_X = np.array([40.0, 4.2, 0.15, 0.002, 0.0006, 0.0003])
TRUE_COEF_Y = np.array([-10.0, 0.2, 2.4, -0.001, 0.0002, 0.0004])


def apply_true_map(px, py):
    b = quadratic_basis(px, py)
    return float(b @ TRUE_COEF_X), float(b @ TRUE_COEF_Y)


def test_pixel_pitch_default_geometry():
    pitch = pixel_pitch(ScreenGeometry())
    assert pitch == pytest.approx(0.3566, abs=1e-3)
    # independent derivation: aspect triangle gives the physical width
    width_mm = 558.8 * 1366 / math.sqrt(1366 ** 2 + 768 ** 2)
    assert pitch == pytest.approx(width_mm / 1366, abs=1e-12)


def test_pixel_pitch_scales_with_diagonal():
    base = pixel_pitch(ScreenGeometry())
    doubled = pixel_pitch(ScreenGeometry(diagonal_mm=2 * 558.8))
    assert doubled == pytest.approx(2 * base, abs=1e-12)
    # vertical derivation lands on the same value for square pixels
    height_mm = 558.8 * 768 / math.sqrt(1366 ** 2 + 768 ** 2)
    assert height_mm / 768 == pytest.approx(base, rel=1e-12)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ScreenGeometry(diagonal_mm=0)
    with pytest.raises(ValueError):
        ScreenGeometry(viewing_distance_mm=-5)
    with pytest.raises(ValueError):
        ScreenGeometry(resolution=(0, 768))


def test_square_side_px_default():
    side = square_side_px(ScreenGeometry())
    assert abs(side - 78) <= 1
    # oracle: 7.8 cm^2 -> sqrt(780 mm^2) / pitch, rounded half up
    expect = math.sqrt(780.0) / pixel_pitch(ScreenGeometry())
    assert side == int(math.floor(expect + 0.5))


def test_calibration_targets_layout():
    targets = calibration_targets()
    assert len(targets) == TARGET_COUNT == 20
    assert [t.index for t in targets] == list(range(1, 21))
    assert targets[0].row == 1 and targets[0].col == 1
    assert targets[5].row == 2 and targets[5].col == 1  # row-major order
    assert targets[0].center == (137, 96)   # round(0.5*1366/5), round(0.5*768/4)
    assert targets[19].center == (1229, 672)
    assert len({t.color for t in targets}) == 20
    assert all(t.dwell == DEFAULT_DWELL_S for t in targets)
    assert all(t.square_side == square_side_px(ScreenGeometry())
               for t in targets)
    for t in targets:
        half = t.square_side / 2
        assert t.center[0] - half >= 0 and t.center[0] + half <= 1366
        assert t.center[1] - half >= 0 and t.center[1] + half <= 768


def test_calibration_targets_overflow():
    # enormous pixel density makes the fixed-area square wider than a grid cell
    dense = ScreenGeometry(diagonal_mm=100.0, resolution=(4000, 200))
    with pytest.raises(GridOverflow):
        calibration_targets(dense)


def test_aggregate_fixation_median_after_settle():
    t0 = 10_000
    samples = [GazeSample(px=999, py=999, t=t0),       # settle window
               GazeSample(px=888, py=888, t=t0 + 499)]  # still inside
    for i, (px, py) in enumerate([(10, 20), (11, 21), (12, 22),
                                  (13, 23), (140, 240)]):  # one outlier
        samples.append(GazeSample(px=px, py=py, t=t0 + 500 + i * 50))
    fx, fy = aggregate_fixation(samples)
    assert (fx, fy) == (12.0, 22.0)  # median ignores the outlier entirely


def test_aggregate_fixation_insufficient():
    t0 = 0
    samples = [GazeSample(px=1, py=1, t=t0 + dt)
               for dt in (0, 100, 600, 700, 800, 900)]  # only 4 post-settle
    with pytest.raises(InsufficientSamples):
        aggregate_fixation(samples)
    with pytest.raises(InsufficientSamples):
        aggregate_fixation([])


def test_quadratic_basis_terms():
    assert np.array_equal(quadratic_basis(2.0, 3.0),
                          np.array([1.0, 2.0, 3.0, 6.0, 4.0, 9.0]))


def test_fit_mapping_recovers_known_coefficients():
    pupil = pupil_grid()
    screen = [apply_true_map(px, py) for px, py in pupil]
    model = fit_mapping(pupil, screen)
    assert np.allclose(model.coef_x, TRUE_COEF_X, atol=1e-6)
    assert np.allclose(model.coef_y, TRUE_COEF_Y, atol=1e-6)
    assert model.rms_x < 1e-6 and model.rms_y < 1e-6
    # held-out point maps through the recovered coefficients exactly
    probe = (217.3, 141.9)
    gaze = map_gaze(model, probe)
    expect = apply_true_map(*probe)
    assert gaze.sx == pytest.approx(expect[0], abs=1e-6)
    assert gaze.sy == pytest.approx(expect[1], abs=1e-6)


def test_fit_mapping_affine_data_has_no_quadratic_terms():
    pupil = pupil_grid()
    screen = [(12.0 + 3.5 * px + 0.25 * py, -4.0 + 0.1 * px + 2.0 * py)
              for px, py in pupil]
    model = fit_mapping(pupil, screen)
    assert np.all(np.abs(model.coef_x[3:]) <= 1e-6)
    assert np.all(np.abs(model.coef_y[3:]) <= 1e-6)
    assert model.coef_x[1] == pytest.approx(3.5, abs=1e-9)
    assert model.coef_y[2] == pytest.approx(2.0, abs=1e-9)


def test_fit_mapping_permutation_invariant():
    rng = np.random.default_rng(12)
    pupil = pupil_grid()
    screen = [apply_true_map(px, py) for px, py in pupil]
    screen = [(sx + rng.normal(0, 2), sy + rng.normal(0, 2))
              for sx, sy in screen]
    base = fit_mapping(pupil, screen)
    order = rng.permutation(len(pupil))
    shuffled = fit_mapping([pupil[i] for i in order],
                           [screen[i] for i in order])
    assert np.allclose(base.coef_x, shuffled.coef_x, atol=1e-9)
    assert base.rms_x == pytest.approx(shuffled.rms_x, abs=1e-9)


def test_fit_mapping_residual_is_rms_of_errors():
    rng = np.random.default_rng(13)
    pupil = pupil_grid()
    screen = [apply_true_map(px, py) for px, py in pupil]
    noisy = [(sx + rng.normal(0, 3), sy + rng.normal(0, 3))
             for sx, sy in screen]
    model = fit_mapping(pupil, noisy)
    pred = [map_gaze(model, p) for p in pupil]
    ex = [g.sx - s[0] for g, s in zip(pred, noisy)]
    ey = [g.sy - s[1] for g, s in zip(pred, noisy)]
    assert model.rms_x == pytest.approx(math.sqrt(np.mean(np.square(ex))),
                                        abs=1e-9)
    assert model.rms_y == pytest.approx(math.sqrt(np.mean(np.square(ey))),
                                        abs=1e-9)
    assert model.residual_rms == pytest.approx(
        math.hypot(model.rms_x, model.rms_y), abs=1e-12)


def test_fit_mapping_rejects_bad_inputs():
    pupil = pupil_grid()
    with pytest.raises(TooFewPoints):
        fit_mapping(pupil[:5], [(0.0, 0.0)] * 5)
    with pytest.raises(TooFewPoints):
        fit_mapping(pupil, [(0.0, 0.0)] * (len(pupil) - 1))
    with pytest.raises(RankDeficient):
        fit_mapping([(100.0, 100.0)] * 20, [(i, i) for i in range(20)])
    with pytest.raises(RankDeficient):
        # collinear points cannot pin down the 2D quadratic
        fit_mapping([(float(i), 2.0 * i) for i in range(20)],
                    [(i, i) for i in range(20)])


def test_map_gaze_identity_and_flags():
    model = identity_model()
    assert map_gaze(model, (100.0, 100.0)) == (100.0, 100.0, True)
    assert map_gaze(model, (-5.0, 10.0)).on_screen is False
    assert map_gaze(model, (1365.5, 767.5)).on_screen is True
    assert map_gaze(model, (1366.0, 10.0)).on_screen is False


def test_pixels_to_degrees_examples():
    assert pixels_to_degrees(0) == 0.0
    assert pixels_to_degrees(78) == pytest.approx(3.19, abs=0.02)
    # oracle recomputation
    pitch = pixel_pitch(ScreenGeometry())
    expect = math.degrees(math.atan(78 * pitch / 500.0))
    assert pixels_to_degrees(78) == pytest.approx(expect, abs=1e-12)
    assert pixels_to_degrees(-78) == pixels_to_degrees(78)
    assert pixels_to_degrees((78.0, 0.0)) == pixels_to_degrees(78)


def test_pixels_to_degrees_rotation_invariance():
    rng = np.random.default_rng(21)
    for _ in range(20):
        r = rng.uniform(5, 400)
        a1, a2 = rng.uniform(0, 2 * math.pi, size=2)
        d1 = pixels_to_degrees((r * math.cos(a1), r * math.sin(a1)))
        d2 = pixels_to_degrees((r * math.cos(a2), r * math.sin(a2)))
        assert d1 == pytest.approx(d2, abs=1e-9)


def test_pixels_to_degrees_monotone_and_sublinear():
    values = [pixels_to_degrees(x) for x in (1, 10, 50, 100, 500, 2000)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert pixels_to_degrees(20) == pytest.approx(
        2 * pixels_to_degrees(10), rel=1e-3)  # near-linear small angles
    assert pixels_to_degrees(2000) < 2 * pixels_to_degrees(1000)


def test_error_grid_table_mean_is_exact():
    grid = ErrorGrid(np.array(TABLE1_CELLS, dtype=float))
    assert grid.mean_deg == 1.7  # 34 / 20 is exact in binary64
    assert np.array_equal(grid.rounded_cells(), np.array(TABLE1_CELLS))


def test_error_grid_shape_and_csv(tmp_path):
    with pytest.raises(ValueError):
        ErrorGrid(np.zeros((3, 5)))
    grid = ErrorGrid(np.full((4, 5), 0.25))
    out = tmp_path / "grid.csv"
    grid.to_csv(out)
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 5
    assert lines[0] == ",".join(["0.250000"] * 5)
    assert lines[-1] == "mean_deg,0.250000"


def test_evaluate_grid_mean_matches_brute_force():
    rng = np.random.default_rng(30)
    targets = calibration_targets()
    estimates = {}
    all_errs = []
    for t in targets:
        trials = []
        for _ in range(4):
            dx, dy = rng.normal(0, 30, size=2)
            trials.append((t.center[0] + dx, t.center[1] + dy))
            all_errs.append(pixels_to_degrees((dx, dy)))
        estimates[t.index] = trials
    grid = evaluate_grid(estimates, targets)
    assert grid.mean_deg == pytest.approx(np.mean(all_errs), abs=1e-12)
    assert grid.cells.min() > 0


def test_evaluate_grid_exact_on_targets():
    targets = calibration_targets()
    estimates = {t.index: [tuple(map(float, t.center))] for t in targets}
    grid = evaluate_grid(estimates, targets)
    assert np.array_equal(grid.cells, np.zeros((GRID_ROWS, GRID_COLS)))
    assert grid.mean_deg == 0.0


def test_evaluate_grid_missing_target():
    targets = calibration_targets()
    estimates = {t.index: [t.center] for t in targets}
    del estimates[7]
    with pytest.raises(MissingTarget):
        evaluate_grid(estimates, targets)


def newton_invert(sx, sy, guess):
    """Invert the true quadratic map with a 2D Newton iteration."""
    px, py = guess
    for _ in range(50):
        fx, fy = apply_true_map(px, py)
        rx, ry = fx - sx, fy - sy
        if abs(rx) < 1e-12 and abs(ry) < 1e-12:
            break
        j00 = TRUE_COEF_X[1] + TRUE_COEF_X[3] * py + 2 * TRUE_COEF_X[4] * px
        j01 = TRUE_COEF_X[2] + TRUE_COEF_X[3] * px + 2 * TRUE_COEF_X[5] * py
        j10 = TRUE_COEF_Y[1] + TRUE_COEF_Y[3] * py + 2 * TRUE_COEF_Y[4] * px
        j11 = TRUE_COEF_Y[2] + TRUE_COEF_Y[3] * px + 2 * TRUE_COEF_Y[5] * py
        det = j00 * j11 - j01 * j10
        px -= (j11 * rx - j01 * ry) / det
        py -= (-j10 * rx + j00 * ry) / det
    return px, py


def test_end_to_end_noisy_calibration_under_half_degree():
    rng = np.random.default_rng(77)
    geometry = ScreenGeometry()
    targets = calibration_targets(geometry)
    true_pupils = {t.index: newton_invert(t.center[0], t.center[1],
                                          (t.center[0] / 4.2, t.center[1] / 2.4))
                   for t in targets}
    trials = {t.index: [(true_pupils[t.index][0] + rng.normal(0, 1.0),
                         true_pupils[t.index][1] + rng.normal(0, 1.0))
                        for _ in range(30)] for t in targets}
    fit_pupil = [tuple(np.median(np.array(trials[t.index]), axis=0))
                 for t in targets]
    fit_screen = [t.center for t in targets]
    model = fit_mapping(fit_pupil, fit_screen, geometry)
    errs = []
    estimates = {}
    for t in targets:
        pts = [map_gaze(model, q) for q in trials[t.index]]
        estimates[t.index] = [(g.sx, g.sy) for g in pts]
        errs += [pixels_to_degrees((g.sx - t.center[0], g.sy - t.center[1]),
                                   geometry) for g in pts]
    assert float(np.mean(errs)) <= 0.5
    grid = evaluate_grid(estimates, targets, geometry)
    assert grid.mean_deg == pytest.approx(np.mean(errs), abs=1e-9)


def test_noiseless_trials_recover_exactly():
    geometry = ScreenGeometry()
    targets = calibration_targets(geometry)
    pupils = [newton_invert(t.center[0], t.center[1],
                            (t.center[0] / 4.2, t.center[1] / 2.4))
              for t in targets]
    model = fit_mapping(pupils, [t.center for t in targets], geometry)
    for t, p in zip(targets, pupils):
        g = map_gaze(model, p)
        assert math.hypot(g.sx - t.center[0], g.sy - t.center[1]) < 1e-6


def test_session_round_trip(tmp_path):
    samples = [GazeSample(px=1.5, py=2.25, t=1000, target=None, conf=0.5),
               GazeSample(px=-3.0, py=4.0, t=1033, target=7, conf=1.0)]
    path = tmp_path / "session.jsonl"
    write_session(path, samples)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 2
    back = read_session(path)
    assert back == samples


def test_model_round_trip(tmp_path):
    pupil = pupil_grid()
    screen = [apply_true_map(px, py) for px, py in pupil]
    model = fit_mapping(pupil, screen,
                        ScreenGeometry(diagonal_mm=600.0,
                                       resolution=(1920, 1080),
                                       viewing_distance_mm=650.0))
    path = tmp_path / "model.json"
    save_model(path, model)
    back = load_model(path)
    assert np.array_equal(back.coef_x, model.coef_x)
    assert np.array_equal(back.coef_y, model.coef_y)
    assert back.rms_x == model.rms_x and back.rms_y == model.rms_y
    assert back.geometry == model.geometry