"""Model bundle (G, F, D_A, D_B + optimizers) and its checkpoint format.

A checkpoint is a directory: `manifest.json` describing config, counters and
tensor shapes, plus one raw binary blob per tensor (little-endian float32,
row-major). Save -> load -> translate is bit-identical on fixed hardware.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
import torch
from torch import nn

from ..dataset import EYE_HEIGHT, EYE_WIDTH, EyeImage
from ..errors import ShapeMismatch
from .config import TrainingConfig
from .networks import Discriminator, Generator, build_discriminator, build_generator

FORMAT_VERSION = 1
MODEL_NAMES = ("G", "F", "D_A", "D_B")


@dataclass
class ModelBundle:
    G: Generator  # A (raw) -> B (marked)
    F: Generator  # B -> A
    D_A: Discriminator
    D_B: Discriminator
    opt_G: torch.optim.Adam
    opt_F: torch.optim.Adam
    opt_DA: torch.optim.Adam
    opt_DB: torch.optim.Adam
    config: TrainingConfig
    step: int = 0
    epoch: int = 0

    def models(self) -> Dict[str, nn.Module]:
        return {"G": self.G, "F": self.F, "D_A": self.D_A, "D_B": self.D_B}

    def optimizers(self) -> Dict[str, torch.optim.Adam]:
        return {"G": self.opt_G, "F": self.opt_F,
                "D_A": self.opt_DA, "D_B": self.opt_DB}


def _make_optimizer(model: nn.Module, config: TrainingConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=config.learning_rate,
                            betas=(config.adam_beta1, 0.999))


def create_bundle(config: TrainingConfig) -> ModelBundle:
    """Fresh bundle; the four models get distinct seeds derived from config.seed."""
    g = build_generator(config, seed=config.seed)
    f = build_generator(config, seed=config.seed + 1)
    d_a = build_discriminator(config, seed=config.seed + 2)
    d_b = build_discriminator(config, seed=config.seed + 3)
    return ModelBundle(G=g, F=f, D_A=d_a, D_B=d_b,
                       opt_G=_make_optimizer(g, config),
                       opt_F=_make_optimizer(f, config),
                       opt_DA=_make_optimizer(d_a, config),
                       opt_DB=_make_optimizer(d_b, config),
                       config=config)


def image_to_tensor(pixels: np.ndarray) -> torch.Tensor:
    """HxWx3 uint8 -> 1x3xHxW float32 in [-1, 1]."""
    arr = np.asarray(pixels, dtype=np.float32) / 127.5 - 1.0
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """3xHxW (or 1x3xHxW) in [-1, 1] -> HxWx3 uint8; -1 -> 0 and +1 -> 255."""
    if t.dim() == 4:
        t = t[0]
    arr = t.detach().cpu().permute(1, 2, 0).numpy()
    scaled = (arr + 1.0) * 127.5
    return np.floor(np.clip(scaled, 0, 255) + 0.5).clip(0, 255).astype(np.uint8)


def translate(bundle: ModelBundle, image: Union[EyeImage, np.ndarray],
              direction: str = "a2b") -> EyeImage:
    """Run one generator on a 400x300 image; output provenance 'translated'."""
    pixels = image.pixels if isinstance(image, EyeImage) else np.asarray(image)
    if pixels.shape != (EYE_HEIGHT, EYE_WIDTH, 3):
        raise ShapeMismatch(f"expected {EYE_HEIGHT}x{EYE_WIDTH}x3, got {pixels.shape}")
    if direction not in ("a2b", "b2a"):
        raise ValueError(f"direction must be 'a2b' or 'b2a', got {direction!r}")
    net = bundle.G if direction == "a2b" else bundle.F
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            out = net(image_to_tensor(pixels))
    finally:
        net.train(was_training)
    return EyeImage(tensor_to_image(out), provenance="translated")


def _write_blob(dir_path: Path, name: str, tensor: torch.Tensor) -> Dict:
    arr = tensor.detach().cpu().numpy().astype("<f4")
    filename = name + ".bin"
    arr.tofile(dir_path / filename)
    return {"file": filename, "shape": list(arr.shape)}


def _read_blob(dir_path: Path, entry: Dict) -> torch.Tensor:
    arr = np.fromfile(dir_path / entry["file"], dtype="<f4")
    arr = arr.reshape(entry["shape"]).astype(np.float32)
    return torch.from_numpy(arr)


def save_checkpoint(bundle: ModelBundle, out_dir: str | Path) -> Path:
    """Write manifest.json plus one blob per model/optimizer tensor."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "step": bundle.step,
        "epoch": bundle.epoch,
        "config": bundle.config.to_dict(),
        "models": {},
        "optimizers": {},
    }
    for model_name, model in bundle.models().items():
        entries = {}
        for key, tensor in model.state_dict().items():
            entries[key] = _write_blob(out_dir, f"{model_name}__{key}", tensor)
        manifest["models"][model_name] = entries
    for model_name, opt in bundle.optimizers().items():
        params = list(bundle.models()[model_name].parameters())
        opt_entries = {}
        for idx, param in enumerate(params):
            state = opt.state.get(param)
            if not state:
                continue
            opt_entries[str(idx)] = {
                "step": float(state["step"]),
                "exp_avg": _write_blob(out_dir, f"opt_{model_name}__{idx}.exp_avg",
                                       state["exp_avg"]),
                "exp_avg_sq": _write_blob(out_dir, f"opt_{model_name}__{idx}.exp_avg_sq",
                                          state["exp_avg_sq"]),
            }
        manifest["optimizers"][model_name] = opt_entries
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                           encoding="utf-8")
    return out_dir


def load_checkpoint(ckpt_dir: str | Path) -> ModelBundle:
    ckpt_dir = Path(ckpt_dir)
    manifest = json.loads((ckpt_dir / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version "
                         f"{manifest.get('format_version')}")
    config = TrainingConfig.from_dict(manifest["config"])
    bundle = create_bundle(config)
    bundle.step = int(manifest["step"])
    bundle.epoch = int(manifest["epoch"])
    for model_name, model in bundle.models().items():
        entries = manifest["models"][model_name]
        state = {key: _read_blob(ckpt_dir, entry) for key, entry in entries.items()}
        model.load_state_dict(state)
    for model_name, opt in bundle.optimizers().items():
        params = list(bundle.models()[model_name].parameters())
        for idx_str, entry in manifest["optimizers"].get(model_name, {}).items():
            param = params[int(idx_str)]
            opt.state[param] = {
                "step": torch.tensor(float(entry["step"])),
                "exp_avg": _read_blob(ckpt_dir, entry["exp_avg"]),
                "exp_avg_sq": _read_blob(ckpt_dir, entry["exp_avg_sq"]),
            }
    return bundle
