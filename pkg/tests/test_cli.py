import json
import re
from pathlib import Path

import numpy as np
import pytest

from greengaze.calibration import GazeSample, write_session
from greengaze.cli import main
from greengaze.engine import TrainingConfig, create_bundle, save_checkpoint
from greengaze.imio import read_rgb, write_rgb
from synthdata import face_frame, synthetic_eye, write_table1_session

LOG_LINE = re.compile(r"^>\d+, dA\[\d+\.\d{3},\d+\.\d{3}\] "
                      r"dB\[\d+\.\d{3},\d+\.\d{3}\] g\[\d+\.\d{3},\d+\.\d{3}\]$")


@pytest.fixture(scope="module")
def ckpt_dir(tmp_path_factory):
    bundle = create_bundle(TrainingConfig(seed=2, ngf=8, ndf=8,
                                          residual_blocks=1))
    return save_checkpoint(bundle, tmp_path_factory.mktemp("ckpt") / "c0")


@pytest.fixture(scope="module")
def table1_session(tmp_path_factory):
    path = tmp_path_factory.mktemp("session") / "table1.jsonl"
    write_table1_session(path)
    return path


def write_label_inputs(tmp_path, n=2):
    images = tmp_path / "images"
    images.mkdir()
    for i in range(n):
        write_rgb(images / f"img_{i}.png", synthetic_eye(180 + 20 * i, 150))
    labels = tmp_path / "labels.csv"
    rows = ["filename,cx,cy,radius"]
    rows += [f"img_{i}.png,{180 + 20 * i},150,12" for i in range(n)]
    labels.write_text("\n".join(rows) + "\n")
    return images, labels


def test_no_subcommand_is_usage_error():
    assert main([]) == 2


def test_unknown_flag_is_usage_error():
    assert main(["evaluate", "--bogus", "x"]) == 2


def test_bad_color_is_usage_error(tmp_path, capsys):
    images, labels = write_label_inputs(tmp_path)
    code = main(["label", "--images", str(images), "--labels", str(labels),
                 "--out", str(tmp_path / "pair"), "--color", "1,2"])
    assert code == 2
    assert "usage error" in capsys.readouterr().err


def test_out_of_range_color_is_config_error(tmp_path, capsys):
    images, labels = write_label_inputs(tmp_path)
    code = main(["label", "--images", str(images), "--labels", str(labels),
                 "--out", str(tmp_path / "pair"), "--color", "250,10,10"])
    assert code == 3  # red-dominant marker rejected by MarkerColor


def test_train_missing_dataset_is_config_error(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["train", "--dataset", str(tmp_path / "nope"),
                 "--out", str(out)])
    assert code == 3
    assert not out.exists()  # nothing partial left behind
    assert "config error" in capsys.readouterr().err


def test_train_unknown_config_key_is_config_error(tmp_path):
    cfg = tmp_path / "t.json"
    cfg.write_text(json.dumps({"seed": 1, "warp_speed": 9}))
    dataset = tmp_path / "data"
    (dataset / "trainA").mkdir(parents=True)
    (dataset / "trainB").mkdir()
    code = main(["train", "--config", str(cfg), "--dataset", str(dataset),
                 "--out", str(tmp_path / "run")])
    assert code == 3


def test_label_duplicate_filename_is_data_error(tmp_path, capsys):
    images, labels = write_label_inputs(tmp_path)
    labels.write_text("img_0.png,180,150,12\nimg_0.png,181,150,12\n")
    code = main(["label", "--images", str(images), "--labels", str(labels),
                 "--out", str(tmp_path / "pair")])
    assert code == 4
    assert "data error" in capsys.readouterr().err


def test_label_train_finetune_flow(tmp_path, capsys):
    images, labels = write_label_inputs(tmp_path)
    pair_dir = tmp_path / "pair"
    assert main(["label", "--images", str(images), "--labels", str(labels),
                 "--out", str(pair_dir)]) == 0
    out = capsys.readouterr().out
    assert "domain_a=2 domain_b=2" in out
    assert (pair_dir / "trainA" / "img_0.png").exists()
    assert (pair_dir / "trainB" / "img_0.png").exists()

    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({"seed": 3, "ngf": 8, "ndf": 8,
                               "residual_blocks": 1, "epochs": 1}))
    run_dir = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--dataset", str(pair_dir),
                 "--out", str(run_dir), "--max-steps", "2"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert sum(1 for ln in lines if LOG_LINE.match(ln)) == 2
    assert "steps=2" in lines[-1]
    assert (run_dir / "losses.csv").exists()
    assert (run_dir / "losses.png").stat().st_size > 1000
    epoch_ckpt = run_dir / "checkpoints" / "epoch_001"
    assert epoch_ckpt.is_dir()

    tune_dir = tmp_path / "tuned"
    assert main(["finetune", "--checkpoint", str(epoch_ckpt),
                 "--dataset", str(pair_dir), "--out", str(tune_dir),
                 "--freeze", "G.down", "--max-steps", "1"]) == 0
    out = capsys.readouterr().out
    assert "frozen=1" in out
    assert (tune_dir / "losses.png").exists()


def test_finetune_rejects_architecture_change(tmp_path, ckpt_dir):
    override = tmp_path / "o.json"
    override.write_text(json.dumps({"ngf": 99}))
    dataset = tmp_path / "d"
    (dataset / "trainA").mkdir(parents=True)
    (dataset / "trainB").mkdir()
    code = main(["finetune", "--checkpoint", str(ckpt_dir),
                 "--dataset", str(dataset), "--out", str(tmp_path / "t"),
                 "--config", str(override)])
    assert code == 3


def test_infer_translates_and_detects(tmp_path, ckpt_dir, capsys):
    src = tmp_path / "eye.png"
    write_rgb(src, synthetic_eye(200, 150))
    dst = tmp_path / "translated.png"
    code = main(["infer", "--checkpoint", str(ckpt_dir), "--image", str(src),
                 "--out", str(dst), "--detect"])
    assert code == 0
    out = capsys.readouterr().out
    assert f"translated={dst}" in out
    assert "pupil=" in out  # untrained net: "pupil=none" expected
    assert read_rgb(dst).shape == (300, 400, 3)


def test_infer_rejects_wrong_size_image(tmp_path, ckpt_dir):
    src = tmp_path / "small.png"
    write_rgb(src, np.zeros((40, 60, 3), dtype=np.uint8))
    code = main(["infer", "--checkpoint", str(ckpt_dir), "--image", str(src),
                 "--out", str(tmp_path / "o.png")])
    assert code == 4


def write_pipeline_config(tmp_path, ckpt_dir):
    frame_pixels, face_box, landmarks = face_frame(200, 150, paint=True)
    frames = tmp_path / "frames"
    frames.mkdir()
    for i in range(2):
        write_rgb(frames / f"f_{i}.png", frame_pixels)
    marks = tmp_path / "marks.csv"
    np.savetxt(marks, landmarks, delimiter=",", fmt="%.1f")
    cfg = tmp_path / "pipeline.json"
    cfg.write_text(json.dumps({
        "backend": "static",
        "static_face_box": list(face_box),
        "static_landmarks": str(marks),
        "checkpoint": str(ckpt_dir),
    }))
    return cfg, frames


def test_track_streams_json_updates(tmp_path, ckpt_dir, capsys):
    cfg, frames = write_pipeline_config(tmp_path, ckpt_dir)
    session = tmp_path / "session.jsonl"
    code = main(["track", "--config", str(cfg), "--frames", str(frames),
                 "--session-out", str(session), "--max-frames", "2"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    updates = [json.loads(ln) for ln in lines[:2]]
    assert [u["seq"] for u in updates] == [1, 2]
    assert all(u["type"] == "gaze" for u in updates)
    assert "frames=2" in lines[-1]
    assert session.exists()


def test_track_static_config_missing_landmarks(tmp_path, ckpt_dir):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"backend": "static",
                               "checkpoint": str(ckpt_dir)}))
    code = main(["track", "--config", str(cfg),
                 "--frames", str(tmp_path)])
    assert code == 3


def test_calibrate_replay_is_deterministic(tmp_path, table1_session, capsys):
    model_a = tmp_path / "a.json"
    model_b = tmp_path / "b.json"
    for model in (model_a, model_b):
        code = main(["calibrate", "--replay", str(table1_session),
                     "--model-out", str(model)])
        assert code == 0
        assert "rms_x=" in capsys.readouterr().out
    assert model_a.read_bytes() == model_b.read_bytes()


def test_calibrate_missing_session_is_config_error(tmp_path):
    assert main(["calibrate", "--replay", str(tmp_path / "no.jsonl")]) == 3


def test_evaluate_prints_grid_and_mean(table1_session, capsys):
    assert main(["evaluate", "--session", str(table1_session)]) == 0
    out = capsys.readouterr().out
    assert "row1=1,2,1,1,2" in out
    assert "row4=2,1,2,2,2" in out
    assert "mean_deg=1.7" in out.splitlines()[-1]


def test_evaluate_with_saved_model(tmp_path, table1_session, capsys):
    model = tmp_path / "model.json"
    assert main(["calibrate", "--replay", str(table1_session),
                 "--model-out", str(model)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--session", str(table1_session),
                 "--model", str(model)]) == 0
    assert "mean_deg=1.7" in capsys.readouterr().out


def test_evaluate_out_dir_writes_grid_files(tmp_path, table1_session, capsys):
    out_dir = tmp_path / "report"
    out_dir.mkdir()
    assert main(["evaluate", "--session", str(table1_session),
                 "--out-dir", str(out_dir)]) == 0
    out = capsys.readouterr().out
    csv_path = out_dir / "error_grid.csv"
    png_path = out_dir / "error_grid.png"
    assert f"grid_csv={csv_path}" in out
    assert csv_path.exists() and png_path.stat().st_size > 1000
    assert len(csv_path.read_text().strip().splitlines()) == 5


def test_evaluate_sparse_session_is_data_error(tmp_path):
    path = tmp_path / "sparse.jsonl"
    samples = [GazeSample(px=100.0, py=100.0, t=k * 200, target=1)
               for k in range(10)]
    write_session(path, samples)
    assert main(["evaluate", "--session", str(path)]) == 4


def test_convert_isolates_bad_rows(tmp_path, capsys):
    images = tmp_path / "raw"
    images.mkdir()
    write_rgb(images / "a.png", np.full((72, 128, 3), 90, dtype=np.uint8))
    write_rgb(images / "b.png", np.full((72, 128, 3), 90, dtype=np.uint8))
    coords = tmp_path / "coords.csv"
    coords.write_text("filename,x,y\na.png,640,360\nmissing.png,10,10\n"
                      "b.png,320,180\n")
    out_dir = tmp_path / "converted"
    code = main(["convert", "--images", str(images), "--coords", str(coords),
                 "--out", str(out_dir), "--source-size", "1280x720"])
    assert code == 0
    out = capsys.readouterr().out
    assert "converted=2 errors=1" in out
    assert "file=missing.png" in out
    assert (out_dir / "trainA" / "a.png").exists()
    assert (out_dir / "trainB" / "b.png").exists()
