"""Generator and discriminator architectures.

Both 400x300 RGB in. The generator is encoder / residual blocks / decoder
with a tanh head; the discriminator is a strided-convolution patch scorer.
Every resolution-changing convolution keeps kernel size a multiple of its
stride, activations are LeakyReLU(0.2), normalization is instance norm, and
there are no pooling layers anywhere.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import InvalidConfig
from .config import TrainingConfig

LEAKY_SLOPE = 0.2
INIT_STD = 0.02


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1),
            nn.InstanceNorm2d(channels),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(channels, channels, 3, 1, 1),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x):
        return x + self.body(x)


class Generator(nn.Module):
    """Two stride-2 downsampling convs, N residual blocks, two stride-2
    transposed convs (kernel 4 = 2x stride), 7x7 tanh head."""

    def __init__(self, ngf: int = 64, residual_blocks: int = 6):
        super().__init__()
        self.initial = nn.Sequential(
            nn.Conv2d(3, ngf, 7, 1, 3),
            nn.InstanceNorm2d(ngf),
            nn.LeakyReLU(LEAKY_SLOPE),
        )
        self.down = nn.Sequential(
            nn.Conv2d(ngf, ngf * 2, 4, 2, 1),
            nn.InstanceNorm2d(ngf * 2),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(ngf * 2, ngf * 4, 4, 2, 1),
            nn.InstanceNorm2d(ngf * 4),
            nn.LeakyReLU(LEAKY_SLOPE),
        )
        self.blocks = nn.Sequential(
            *[ResidualBlock(ngf * 4) for _ in range(residual_blocks)])
        self.up = nn.Sequential(
            nn.ConvTranspose2d(ngf * 4, ngf * 2, 4, 2, 1),
            nn.InstanceNorm2d(ngf * 2),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.ConvTranspose2d(ngf * 2, ngf, 4, 2, 1),
            nn.InstanceNorm2d(ngf),
            nn.LeakyReLU(LEAKY_SLOPE),
        )
        self.head = nn.Sequential(
            nn.Conv2d(ngf, 3, 7, 1, 3),
            nn.Tanh(),
        )

    def forward(self, x):
        x = self.initial(x)
        x = self.down(x)
        x = self.blocks(x)
        x = self.up(x)
        return self.head(x)


class Discriminator(nn.Module):
    """Patch discriminator: strided 4x4 convolutions down to a score map.
    Raw (unbounded) scores; callers apply a sigmoid only for the
    log-likelihood objective."""

    def __init__(self, ndf: int = 64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, ndf, 4, 2, 1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(ndf, ndf * 2, 4, 2, 1),
            nn.InstanceNorm2d(ndf * 2),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(ndf * 2, ndf * 4, 4, 2, 1),
            nn.InstanceNorm2d(ndf * 4),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(ndf * 4, ndf * 8, 4, 1, 1),
            nn.InstanceNorm2d(ndf * 8),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(ndf * 8, 1, 4, 1, 1),
        )

    def forward(self, x):
        return self.net(x)


def init_weights(module: nn.Module, seed: int) -> nn.Module:
    """Seeded N(0, 0.02) init on every convolution weight, zero biases."""
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            with torch.no_grad():
                m.weight.normal_(0.0, INIT_STD, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
    return module


def build_generator(config: TrainingConfig, seed: int | None = None) -> Generator:
    if not isinstance(config, TrainingConfig):
        raise InvalidConfig(f"expected TrainingConfig, got {type(config).__name__}")
    net = Generator(ngf=config.ngf, residual_blocks=config.residual_blocks)
    return init_weights(net, config.seed if seed is None else seed)


def build_discriminator(config: TrainingConfig, seed: int | None = None) -> Discriminator:
    if not isinstance(config, TrainingConfig):
        raise InvalidConfig(f"expected TrainingConfig, got {type(config).__name__}")
    net = Discriminator(ndf=config.ndf)
    return init_weights(net, config.seed if seed is None else seed)
