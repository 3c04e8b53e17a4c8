"""Loss functions for the two-generator/two-discriminator objective.

All functions accept torch tensors (returning 0-dim tensors that stay in the
autograd graph) or plain arrays/floats (returning floats).
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np
import torch

from ..errors import DomainError, ShapeMismatch
from .config import TrainingConfig

Scores = Union[np.ndarray, torch.Tensor, float]


def _is_tensor(*values) -> bool:
    return any(isinstance(v, torch.Tensor) for v in values)


def adversarial_objective(d_real_scores: Scores, d_fake_scores: Scores):
    """Log-likelihood objective: E[log D(y)] + E[log(1 - D(G(x)))].

    Scores must already be probabilities in (0, 1) (sigmoid applied to raw
    patch scores). The discriminator maximizes this; the generator minimizes.
    """
    if _is_tensor(d_real_scores, d_fake_scores):
        real = torch.as_tensor(d_real_scores, dtype=torch.float32)
        fake = torch.as_tensor(d_fake_scores, dtype=torch.float32)
        if ((real <= 0) | (real >= 1)).any() or ((fake <= 0) | (fake >= 1)).any():
            raise DomainError("log-likelihood scores must lie strictly in (0, 1)")
        return torch.log(real).mean() + torch.log(1.0 - fake).mean()
    real = np.asarray(d_real_scores, dtype=np.float64)
    fake = np.asarray(d_fake_scores, dtype=np.float64)
    if (real <= 0).any() or (real >= 1).any() or (fake <= 0).any() or (fake >= 1).any():
        raise DomainError("log-likelihood scores must lie strictly in (0, 1)")
    return float(np.log(real).mean() + np.log(1.0 - fake).mean())


def _l1_mean(a, b, what: str):
    if _is_tensor(a, b):
        ta = torch.as_tensor(a)
        tb = torch.as_tensor(b)
        if ta.shape != tb.shape:
            raise ShapeMismatch(f"{what}: {tuple(ta.shape)} vs {tuple(tb.shape)}")
        return (ta - tb).abs().mean()
    na = np.asarray(a, dtype=np.float64)
    nb = np.asarray(b, dtype=np.float64)
    if na.shape != nb.shape:
        raise ShapeMismatch(f"{what}: {na.shape} vs {nb.shape}")
    return float(np.abs(na - nb).mean())


def cycle_consistency_loss(original, reconstructed):
    """Mean absolute difference between a batch and its round-trip
    reconstruction (forward: F(G(x)) vs x; backward: G(F(y)) vs y)."""
    return _l1_mean(original, reconstructed, "cycle loss shapes differ")


def identity_loss(target_batch, generator_output_on_target):
    """Mean absolute difference between y and G(y): the generator should pass
    target-domain images through untouched."""
    return _l1_mean(target_batch, generator_output_on_target,
                    "identity loss shapes differ")


def composite_generator_loss(adv, cycle_fwd, cycle_bwd, identity,
                             config: TrainingConfig):
    """adv + lambda_cycle * (cycle_fwd + cycle_bwd) + lambda_identity * identity."""
    if not _is_tensor(adv, cycle_fwd, cycle_bwd, identity):
        for name, v in (("adv", adv), ("cycle_fwd", cycle_fwd),
                        ("cycle_bwd", cycle_bwd), ("identity", identity)):
            if not math.isfinite(float(v)):
                raise DomainError(f"non-finite loss component {name}: {v}")
    return (adv + config.lambda_cycle * (cycle_fwd + cycle_bwd)
            + config.lambda_identity * identity)


def least_squares_d_loss(d_real_scores, d_fake_scores, real_target, fake_target):
    """Half squared errors of the discriminator on real and fake batches.

    Returns (real_half, fake_half); the full discriminator loss is their sum
    and is exactly 0 at (real_target, fake_target).
    """
    real_half = 0.5 * ((d_real_scores - real_target) ** 2).mean()
    fake_half = 0.5 * ((d_fake_scores - fake_target) ** 2).mean()
    return real_half, fake_half


def least_squares_g_loss(d_fake_scores):
    """Generator's adversarial term: fakes should score as real (target 1)."""
    return 0.5 * ((d_fake_scores - 1.0) ** 2).mean()


def log_likelihood_d_loss(d_real_raw, d_fake_raw, real_target, fake_target):
    """Binary cross-entropy halves on raw scores (sigmoid applied here)."""
    bce = torch.nn.functional.binary_cross_entropy_with_logits
    real_half = bce(d_real_raw, torch.clamp(real_target, 0.0, 1.0))
    fake_half = bce(d_fake_raw, torch.clamp(fake_target, 0.0, 1.0))
    return real_half, fake_half


def log_likelihood_g_loss(d_fake_raw):
    """Non-saturating generator term: -E[log D(G(x))] on raw scores."""
    bce = torch.nn.functional.binary_cross_entropy_with_logits
    return bce(d_fake_raw, torch.ones_like(d_fake_raw))
