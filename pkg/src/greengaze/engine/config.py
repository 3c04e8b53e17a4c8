"""Training configuration: loss weights, optimizer settings, architecture
sizes, and the seed that fully determines a run on fixed hardware."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict

from ..errors import InvalidConfig

ADVERSARIAL_FORMS = ("least_squares", "log_likelihood")


@dataclass
class TrainingConfig:
    lambda_cycle: float = 10.0
    lambda_identity: float = 5.0
    adversarial_form: str = "least_squares"
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    batch_size: int = 1
    epochs: int = 20
    pool_size: int = 50
    label_noise_amplitude: float = 0.05
    real_label: float = 0.9  # discriminator label smoothing target
    seed: int = 0
    # architecture sizes
    ngf: int = 64
    ndf: int = 64
    residual_blocks: int = 6
    # checkpoint cadence: every N steps (0 = epoch ends only)
    checkpoint_every_steps: int = 0

    def __post_init__(self):
        if self.lambda_cycle < 0 or self.lambda_identity < 0:
            raise InvalidConfig("loss weights must be >= 0")
        if self.adversarial_form not in ADVERSARIAL_FORMS:
            raise InvalidConfig(f"adversarial_form must be one of "
                                f"{ADVERSARIAL_FORMS}, got {self.adversarial_form!r}")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be > 0")
        if not 0 <= self.adam_beta1 < 1:
            raise InvalidConfig("adam_beta1 must lie in [0, 1)")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if self.epochs < 0:
            raise InvalidConfig("epochs must be >= 0")
        if self.pool_size < 0:
            raise InvalidConfig("pool_size must be >= 0")
        if self.label_noise_amplitude < 0:
            raise InvalidConfig("label_noise_amplitude must be >= 0")
        if not 0 < self.real_label <= 1:
            raise InvalidConfig("real_label must lie in (0, 1]")
        if self.ngf < 1 or self.ndf < 1:
            raise InvalidConfig("channel widths must be >= 1")
        if self.residual_blocks < 0:
            raise InvalidConfig("residual_blocks must be >= 0")
        if self.checkpoint_every_steps < 0:
            raise InvalidConfig("checkpoint_every_steps must be >= 0")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Dict) -> "TrainingConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)
