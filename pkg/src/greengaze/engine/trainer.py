"""Training loop: per-step updates for G, F, D_A, D_B, loss reporting in the
two-bracket log grammar, CSV loss curves, checkpoints, and fine-tuning with
frozen layer prefixes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..errors import EmptyDomain, NonFiniteLoss, ShapeMismatch, UnknownLayerName
from ..imio import read_rgb
from .bundle import ModelBundle, create_bundle, image_to_tensor, save_checkpoint, translate
from .config import TrainingConfig
from .losses import (composite_generator_loss, least_squares_d_loss,
                     least_squares_g_loss, log_likelihood_d_loss,
                     log_likelihood_g_loss)
from .pool import ImagePool

log = logging.getLogger("greengaze.train")

LOSS_CSV_HEADER = "step,dA_real,dA_fake,dB_real,dB_fake,g_AtoB,g_BtoA,adv,cyc_f,cyc_b,id"
HEALTHY_G_THRESHOLD = 0.5  # monitoring heuristic only, never a stop condition


@dataclass
class LossReport:
    """Every scalar from one training step; g_* are the per-generator
    composites rebuilt from their own component columns."""

    step: int
    dA_real: float
    dA_fake: float
    dB_real: float
    dB_fake: float
    g_AtoB: float
    g_BtoA: float
    adv_AtoB: float
    adv_BtoA: float
    cycle_fwd: float
    cycle_bwd: float
    id_AtoB: float
    id_BtoA: float

    def values(self) -> List[float]:
        return [self.dA_real, self.dA_fake, self.dB_real, self.dB_fake,
                self.g_AtoB, self.g_BtoA, self.adv_AtoB, self.adv_BtoA,
                self.cycle_fwd, self.cycle_bwd, self.id_AtoB, self.id_BtoA]


def format_log_line(report: LossReport) -> str:
    return (f">{report.step}, "
            f"dA[{report.dA_real:.3f},{report.dA_fake:.3f}] "
            f"dB[{report.dB_real:.3f},{report.dB_fake:.3f}] "
            f"g[{report.g_AtoB:.3f},{report.g_BtoA:.3f}]")


def csv_row(report: LossReport) -> str:
    cols = [str(report.step)] + [
        f"{v:.6f}" for v in (report.dA_real, report.dA_fake, report.dB_real,
                             report.dB_fake, report.g_AtoB, report.g_BtoA,
                             report.adv_AtoB, report.cycle_fwd,
                             report.cycle_bwd, report.id_AtoB)]
    return ",".join(cols)


def write_loss_csv(path: str | Path, reports: Sequence[LossReport]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [LOSS_CSV_HEADER] + [csv_row(r) for r in reports]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_loss_csv(path: str | Path) -> Dict[str, np.ndarray]:
    """Loss curves back as named columns."""
    raw = np.genfromtxt(path, delimiter=",", names=True)
    raw = np.atleast_1d(raw)
    return {name: np.asarray(raw[name], dtype=np.float64)
            for name in raw.dtype.names}


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing mean over `window` samples (shorter at the start)."""
    out = np.empty(len(values))
    arr = np.asarray(values, dtype=np.float64)
    for i in range(len(arr)):
        lo = max(0, i + 1 - window)
        out[i] = arr[lo:i + 1].mean()
    return out


def _pause_grads(model: torch.nn.Module) -> List[bool]:
    """Disable grads for a model, returning the prior flags so that layers
    frozen by fine-tuning stay frozen after restore."""
    flags = [p.requires_grad for p in model.parameters()]
    for p in model.parameters():
        p.requires_grad_(False)
    return flags


def _restore_grads(model: torch.nn.Module, flags: List[bool]) -> None:
    for p, flag in zip(model.parameters(), flags):
        p.requires_grad_(flag)


def _noisy_target(like: torch.Tensor, level: float, amplitude: float,
                  gen: torch.Generator) -> torch.Tensor:
    target = torch.full_like(like, level)
    if amplitude > 0:
        target = target + torch.empty_like(like).uniform_(
            -amplitude, amplitude, generator=gen)
    return target


def train_step(batch_a: torch.Tensor, batch_b: torch.Tensor,
               bundle: ModelBundle, pools: Dict[str, ImagePool],
               config: TrainingConfig,
               rng: Optional[torch.Generator] = None) -> LossReport:
    """One optimizer update each for G, F, D_A and D_B on a normalized batch."""
    if batch_a.shape[1:] != batch_b.shape[1:]:
        raise ShapeMismatch(f"domain batches differ: {tuple(batch_a.shape)} vs "
                            f"{tuple(batch_b.shape)}")
    if rng is None:
        rng = torch.Generator().manual_seed(config.seed * 1_000_003 + bundle.step)
    step = bundle.step + 1
    least_squares = config.adversarial_form == "least_squares"

    # --- generator pass (discriminators held fixed) ---
    flags_da = _pause_grads(bundle.D_A)
    flags_db = _pause_grads(bundle.D_B)
    fake_b = bundle.G(batch_a)
    rec_a = bundle.F(fake_b)
    fake_a = bundle.F(batch_b)
    rec_b = bundle.G(fake_a)
    scores_fake_b = bundle.D_B(fake_b)
    scores_fake_a = bundle.D_A(fake_a)
    if least_squares:
        adv_a2b = least_squares_g_loss(scores_fake_b)
        adv_b2a = least_squares_g_loss(scores_fake_a)
    else:
        adv_a2b = log_likelihood_g_loss(scores_fake_b)
        adv_b2a = log_likelihood_g_loss(scores_fake_a)
    cyc_f = (rec_a - batch_a).abs().mean()
    cyc_b = (rec_b - batch_b).abs().mean()
    idt_a2b = (bundle.G(batch_b) - batch_b).abs().mean()
    idt_b2a = (bundle.F(batch_a) - batch_a).abs().mean()
    total_g = (adv_a2b + adv_b2a
               + config.lambda_cycle * (cyc_f + cyc_b)
               + config.lambda_identity * (idt_a2b + idt_b2a))
    bundle.opt_G.zero_grad()
    bundle.opt_F.zero_grad()
    total_g.backward()
    bundle.opt_G.step()
    bundle.opt_F.step()
    _restore_grads(bundle.D_A, flags_da)
    _restore_grads(bundle.D_B, flags_db)

    # --- discriminator passes, fakes drawn through the pools ---
    halves = {}
    for name, disc, opt, real, fake in (
            ("A", bundle.D_A, bundle.opt_DA, batch_a, fake_a),
            ("B", bundle.D_B, bundle.opt_DB, batch_b, fake_b)):
        pooled = pools[name].query(fake.detach())
        scores_real = disc(real)
        scores_fake = disc(pooled)
        real_target = _noisy_target(scores_real, config.real_label,
                                    config.label_noise_amplitude, rng)
        fake_target = _noisy_target(scores_fake, 0.0,
                                    config.label_noise_amplitude, rng)
        if least_squares:
            real_half, fake_half = least_squares_d_loss(
                scores_real, scores_fake, real_target, fake_target)
        else:
            real_half, fake_half = log_likelihood_d_loss(
                scores_real, scores_fake, real_target, fake_target)
        opt.zero_grad()
        (real_half + fake_half).backward()
        opt.step()
        halves[name] = (float(real_half.detach()), float(fake_half.detach()))

    adv_a2b_f, adv_b2a_f = float(adv_a2b.detach()), float(adv_b2a.detach())
    cyc_f_f, cyc_b_f = float(cyc_f.detach()), float(cyc_b.detach())
    idt_a2b_f, idt_b2a_f = float(idt_a2b.detach()), float(idt_b2a.detach())
    components = [adv_a2b_f, adv_b2a_f, cyc_f_f, cyc_b_f, idt_a2b_f, idt_b2a_f,
                  *halves["A"], *halves["B"]]
    if not all(math.isfinite(v) for v in components):
        raise NonFiniteLoss(f"non-finite loss at step {step}: "
                            f"components {components}", step=step)
    report = LossReport(
        step=step,
        dA_real=halves["A"][0], dA_fake=halves["A"][1],
        dB_real=halves["B"][0], dB_fake=halves["B"][1],
        g_AtoB=composite_generator_loss(adv_a2b_f, cyc_f_f, cyc_b_f,
                                        idt_a2b_f, config),
        g_BtoA=composite_generator_loss(adv_b2a_f, cyc_f_f, cyc_b_f,
                                        idt_b2a_f, config),
        adv_AtoB=adv_a2b_f, adv_BtoA=adv_b2a_f,
        cycle_fwd=cyc_f_f, cycle_bwd=cyc_b_f,
        id_AtoB=idt_a2b_f, id_BtoA=idt_b2a_f,
    )
    if not all(math.isfinite(v) for v in report.values()):
        raise NonFiniteLoss(f"non-finite loss at step {step}: "
                            f"{format_log_line(report)}", step=step)
    bundle.step = step
    return report


@dataclass
class TrainResult:
    bundle: ModelBundle
    reports: List[LossReport]
    checkpoints: List[Path] = field(default_factory=list)
    best: Optional[Dict] = None
    losses_csv: Optional[Path] = None
    log_path: Optional[Path] = None


def _load_image(entry) -> np.ndarray:
    if isinstance(entry, (str, Path)):
        return read_rgb(entry)
    return np.asarray(entry, dtype=np.uint8)


def _index_stream(count: int, rng: np.random.Generator):
    while True:
        for i in rng.permutation(count):
            yield int(i)


def _batch(entries, stream, batch_size: int) -> torch.Tensor:
    tensors = [image_to_tensor(_load_image(entries[next(stream)]))
               for _ in range(batch_size)]
    return torch.cat(tensors, dim=0)


def _validation_rate(bundle: ModelBundle, val_set, tolerance_px: float) -> float:
    from ..locator import detect_pupil

    ok = 0
    for pixels, cx, cy in val_set:
        out = translate(bundle, _load_image(pixels), "a2b")
        det = detect_pupil(out)
        if det is None:
            continue
        if cx is None or math.hypot(det.cx - cx, det.cy - cy) <= tolerance_px:
            ok += 1
    return ok / len(val_set)


def _run_loop(bundle: ModelBundle, pair, config: TrainingConfig,
              out_dir: str | Path, max_steps: Optional[int] = None,
              val_set: Optional[Sequence[Tuple]] = None,
              val_tolerance_px: float = 3.0) -> TrainResult:
    entries_a = list(pair.domain_a)
    entries_b = list(pair.domain_b)
    if not entries_a or not entries_b:
        raise EmptyDomain(f"domains must be non-empty: "
                          f"|A|={len(entries_a)}, |B|={len(entries_b)}")
    out_dir = Path(out_dir)
    ckpt_root = out_dir / "checkpoints"
    ckpt_root.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    pools = {"A": ImagePool(config.pool_size, seed=config.seed + 101),
             "B": ImagePool(config.pool_size, seed=config.seed + 102)}
    stream_a = _index_stream(len(entries_a), np.random.default_rng(config.seed + 7))
    stream_b = _index_stream(len(entries_b), np.random.default_rng(config.seed + 8))
    steps_per_epoch = math.ceil(max(len(entries_a), len(entries_b))
                                / config.batch_size)
    result = TrainResult(bundle=bundle, reports=[],
                         losses_csv=out_dir / "losses.csv",
                         log_path=out_dir / "train.log")
    best_rate = -1.0
    first_epoch = bundle.epoch + 1
    with open(result.losses_csv, "w", encoding="utf-8") as csv_fh, \
            open(result.log_path, "w", encoding="utf-8") as log_fh:
        csv_fh.write(LOSS_CSV_HEADER + "\n")
        for epoch in range(first_epoch, first_epoch + config.epochs):
            for _ in range(steps_per_epoch):
                if max_steps is not None and bundle.step >= max_steps:
                    break
                batch_a = _batch(entries_a, stream_a, config.batch_size)
                batch_b = _batch(entries_b, stream_b, config.batch_size)
                report = train_step(batch_a, batch_b, bundle, pools, config)
                result.reports.append(report)
                csv_fh.write(csv_row(report) + "\n")
                log_fh.write(format_log_line(report) + "\n")
                csv_fh.flush()
                log_fh.flush()
                if (config.checkpoint_every_steps
                        and bundle.step % config.checkpoint_every_steps == 0):
                    path = save_checkpoint(bundle,
                                           ckpt_root / f"step_{bundle.step:06d}")
                    result.checkpoints.append(path)
            bundle.epoch = epoch
            path = save_checkpoint(bundle, ckpt_root / f"epoch_{epoch:03d}")
            result.checkpoints.append(path)
            smoothed = moving_average(
                [r.g_AtoB for r in result.reports], 20)[-1] if result.reports else None
            if smoothed is not None and smoothed < HEALTHY_G_THRESHOLD:
                log.info("epoch %d: smoothed g_AtoB %.3f below %.1f "
                         "(healthy-generator heuristic)",
                         epoch, smoothed, HEALTHY_G_THRESHOLD)
            if val_set:
                rate = _validation_rate(bundle, val_set, val_tolerance_px)
                log.info("epoch %d: validation detection-success rate %.3f",
                         epoch, rate)
                if rate > best_rate:
                    best_rate = rate
                    best_path = save_checkpoint(bundle, ckpt_root / "best")
                    result.best = {"epoch": epoch, "step": bundle.step,
                                   "rate": rate, "checkpoint": str(best_path)}
                    import json
                    (out_dir / "best.json").write_text(
                        json.dumps(result.best, indent=2) + "\n", encoding="utf-8")
            if max_steps is not None and bundle.step >= max_steps:
                break
    return result


def train(pair, config: TrainingConfig, out_dir: str | Path,
          max_steps: Optional[int] = None,
          val_set: Optional[Sequence[Tuple]] = None,
          val_tolerance_px: float = 3.0) -> TrainResult:
    """Train a fresh bundle over shuffled unpaired batches.

    Writes per-step loss curves (losses.csv), the bracketed per-step log
    (train.log), an epoch-end checkpoint per epoch (plus optional step-cadence
    checkpoints), and a best-checkpoint marker when a validation set with
    pupil labels is supplied.
    """
    bundle = create_bundle(config)
    return _run_loop(bundle, pair, config, out_dir, max_steps=max_steps,
                     val_set=val_set, val_tolerance_px=val_tolerance_px)


def freeze_layers(bundle: ModelBundle, freeze_spec: Sequence[str]) -> List[str]:
    """Disable updates for every parameter whose `MODEL.param.path` starts
    with one of the given prefixes; returns the frozen parameter names."""
    named = []
    for model_name, model in bundle.models().items():
        for param_name, param in model.named_parameters():
            named.append((f"{model_name}.{param_name}", param))
    frozen = []
    for prefix in freeze_spec:
        matched = [name for name, _ in named if name.startswith(prefix)]
        if not matched:
            raise UnknownLayerName(f"freeze prefix matches no parameter: {prefix!r}")
        frozen.extend(matched)
    frozen_set = set(frozen)
    for name, param in named:
        if name in frozen_set:
            param.requires_grad_(False)
    return sorted(frozen_set)


def fine_tune(bundle: ModelBundle, pair, freeze_spec: Sequence[str],
              config: TrainingConfig, out_dir: str | Path,
              max_steps: Optional[int] = None,
              val_set: Optional[Sequence[Tuple]] = None,
              val_tolerance_px: float = 3.0) -> TrainResult:
    """Continue training a loaded bundle with the named layer prefixes frozen.

    An empty freeze_spec behaves exactly like train() on the loaded bundle.
    """
    freeze_layers(bundle, freeze_spec)
    return _run_loop(bundle, pair, config, out_dir, max_steps=max_steps,
                     val_set=val_set, val_tolerance_px=val_tolerance_px)
