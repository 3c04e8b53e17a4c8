"""greengaze: eye tracking through green-marker image translation.

Camera frames are cropped to 400x300 eye images, translated by a
cycle-consistent GAN into copies whose pupil is painted an unnatural bright
green, located by color-band thresholding plus morphology, and mapped to
screen coordinates by a quadratic calibration fit.
"""

__version__ = "0.1.0"

from .calibration import (CalibrationModel, CalibrationTarget, ErrorGrid,
                          GazeSample, ScreenGeometry, aggregate_fixation,
                          calibration_targets, evaluate_grid, fit_mapping,
                          map_gaze, pixel_pitch, pixels_to_degrees)
from .dataset import (DEFAULT_MARKER, EyeImage, Frame, MarkerColor, PupilLabel,
                      RegionBox, build_domain_pair, convert_annotated_dataset,
                      crop_resize, detect_face, eye_region_box,
                      load_dataset_pair, locate_eye_landmarks, paint_pupil,
                      round_half_up)
from .engine import (ImagePool, ModelBundle, TrainingConfig,
                     adversarial_objective, build_discriminator,
                     build_generator, composite_generator_loss,
                     cycle_consistency_loss, fine_tune, identity_loss,
                     load_checkpoint, save_checkpoint, train, train_step,
                     translate)
from .locator import (MorphParams, PupilDetection, color_band_mask, detect_pupil,
                      dilate, erode, largest_blob_centroid)
from .pipeline import (GazeUpdate, Pipeline, PipelineConfig, build_pipeline,
                       evaluate_session, fit_session, load_pipeline_config)

__all__ = [name for name in dir() if not name.startswith("_")]
