import numpy as np
import pytest
import torch
from torch import nn

from greengaze.engine import (TrainingConfig, build_discriminator,
                              build_generator)


def tiny(**kw):
    base = dict(seed=1, ngf=8, ndf=8, residual_blocks=1)
    base.update(kw)
    return TrainingConfig(**base)


def test_generator_maps_eye_canvas_to_eye_canvas():
    g = build_generator(tiny())
    with torch.no_grad():
        out = g(torch.zeros(1, 3, 300, 400))
    assert out.shape == (1, 3, 300, 400)


def test_generator_output_in_tanh_range():
    g = build_generator(tiny())
    torch.manual_seed(0)
    with torch.no_grad():
        out = g(torch.rand(2, 3, 300, 400) * 2 - 1)
    assert float(out.min()) >= -1.0 and float(out.max()) <= 1.0


def test_generator_bottleneck_quarter_resolution():
    g = build_generator(tiny())
    x = torch.zeros(1, 3, 300, 400)
    with torch.no_grad():
        h = g.initial(x)
        h = g.down(h)
    assert h.shape[-2:] == (75, 100)  # two stride-2 halvings, both dims >= 8


def test_discriminator_patch_map():
    d = build_discriminator(tiny())
    with torch.no_grad():
        out = d(torch.zeros(1, 3, 300, 400))
    assert out.shape[0] == 1 and out.shape[1] == 1
    assert out.shape[2] >= 8 and out.shape[3] >= 8
    assert out.shape[-2:] == (35, 48)


def test_discriminator_scores_unbounded():
    d = build_discriminator(tiny())
    torch.manual_seed(1)
    with torch.no_grad():
        out = d(torch.rand(1, 3, 300, 400) * 2 - 1)
    # raw patch scores, no sigmoid: values are not confined to (0, 1)
    assert float(out.min()) < 0 or float(out.max()) > 1


def test_same_seed_same_weights():
    cfg = tiny(seed=9)
    g1, g2 = build_generator(cfg), build_generator(cfg)
    for p1, p2 in zip(g1.parameters(), g2.parameters()):
        assert torch.equal(p1, p2)
    g3 = build_generator(cfg, seed=10)
    assert any(not torch.equal(p1, p3)
               for p1, p3 in zip(g1.parameters(), g3.parameters()))


def test_weight_init_distribution():
    cfg = tiny(ngf=16, seed=4)
    g = build_generator(cfg)
    weights = torch.cat([m.weight.detach().flatten()
                         for m in g.modules()
                         if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d))])
    assert abs(float(weights.mean())) < 0.005
    assert float(weights.std()) == pytest.approx(0.02, rel=0.15)
    for m in g.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)) and m.bias is not None:
            assert torch.equal(m.bias, torch.zeros_like(m.bias))


def test_no_pooling_and_kernel_stride_rule():
    cfg = tiny()
    for model in (build_generator(cfg), build_discriminator(cfg)):
        for m in model.modules():
            assert not isinstance(m, (nn.MaxPool2d, nn.AvgPool2d,
                                      nn.AdaptiveAvgPool2d))
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                for k, s in zip(m.kernel_size, m.stride):
                    assert k % s == 0


def test_normalization_and_activation_choices():
    cfg = tiny()
    g, d = build_generator(cfg), build_discriminator(cfg)
    g_norms = [m for m in g.modules() if isinstance(m, nn.InstanceNorm2d)]
    assert g_norms and all(not m.affine for m in g_norms)
    assert all(not isinstance(m, (nn.BatchNorm2d, nn.ReLU))
               for m in g.modules())
    leaky = [m for m in list(g.modules()) + list(d.modules())
             if isinstance(m, nn.LeakyReLU)]
    assert leaky and all(m.negative_slope == pytest.approx(0.2)
                         for m in leaky)


def test_residual_block_count_configurable():
    g = build_generator(tiny(residual_blocks=3))
    assert len(list(g.blocks.children())) == 3


def test_generator_forward_is_deterministic():
    g = build_generator(tiny(seed=6))
    x = torch.linspace(-1, 1, 3 * 300 * 400).reshape(1, 3, 300, 400)
    with torch.no_grad():
        a, b = g(x), g(x)
    assert torch.equal(a, b)
