"""Cycle-consistent translation engine: two generators, two patch
discriminators, four-part composite loss, desk-scale trainer."""

from .bundle import (ModelBundle, create_bundle, image_to_tensor,
                     load_checkpoint, save_checkpoint, tensor_to_image,
                     translate)
from .config import TrainingConfig
from .losses import (adversarial_objective, composite_generator_loss,
                     cycle_consistency_loss, identity_loss,
                     least_squares_d_loss, least_squares_g_loss,
                     log_likelihood_d_loss, log_likelihood_g_loss)
from .networks import (Discriminator, Generator, build_discriminator,
                       build_generator, init_weights)
from .pool import ImagePool
from .trainer import (LOSS_CSV_HEADER, LossReport, TrainResult, csv_row,
                      fine_tune, format_log_line, freeze_layers,
                      moving_average, read_loss_csv, train, train_step,
                      write_loss_csv)

__all__ = [
    "TrainingConfig", "Generator", "Discriminator", "build_generator",
    "build_discriminator", "init_weights", "adversarial_objective",
    "cycle_consistency_loss", "identity_loss", "composite_generator_loss",
    "least_squares_d_loss", "least_squares_g_loss", "log_likelihood_d_loss",
    "log_likelihood_g_loss", "ImagePool", "ModelBundle", "create_bundle",
    "image_to_tensor", "tensor_to_image", "save_checkpoint",
    "load_checkpoint", "translate", "LossReport", "TrainResult", "csv_row",
    "train_step", "train", "fine_tune", "freeze_layers", "format_log_line",
    "write_loss_csv", "read_loss_csv", "moving_average", "LOSS_CSV_HEADER",
]
