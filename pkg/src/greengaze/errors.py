"""Exception types raised across the toolkit."""


class GreenGazeError(Exception):
    """Base class for all toolkit errors."""


# --- dataset construction ---

class MissingModelFile(GreenGazeError):
    """A pretrained detector/predictor artifact could not be loaded."""


class LandmarkFailure(GreenGazeError):
    """Landmark prediction failed or produced fewer than 68 points."""


class DegenerateRegion(GreenGazeError):
    """A region box has zero area (possibly after clamping)."""


class InvalidLabel(GreenGazeError):
    """A pupil label has radius < 1 or its disk misses the canvas."""


class MissingImage(GreenGazeError):
    """A referenced image file does not exist."""


class MalformedRow(GreenGazeError):
    """An annotation table row could not be parsed."""


class DuplicateFilename(GreenGazeError):
    """The same filename appears more than once within a domain."""


# --- translation engine ---

class InvalidConfig(GreenGazeError):
    """A configuration value violates its invariants."""


class DomainError(GreenGazeError):
    """A score fell outside the (0, 1) domain of the log-likelihood objective."""


class ShapeMismatch(GreenGazeError):
    """Array shapes do not match the operation's contract."""


class NonFiniteLoss(GreenGazeError):
    """Training produced a NaN/inf loss; the offending step is recorded."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class EmptyDomain(GreenGazeError):
    """A training domain contains no images."""


class UnknownLayerName(GreenGazeError):
    """A freeze prefix matched no parameter of the model bundle."""


# --- calibration ---

class GridOverflow(GreenGazeError):
    """Calibration squares do not fit on the configured screen."""


class InsufficientSamples(GreenGazeError):
    """Too few gaze samples remain after the settle window."""


class RankDeficient(GreenGazeError):
    """The calibration basis matrix is singular."""


class TooFewPoints(GreenGazeError):
    """Fewer than six calibration points were supplied."""


class MissingTarget(GreenGazeError):
    """A calibration target has no trials in the evaluation input."""


# --- tracking service ---

class PipelineNotReady(GreenGazeError):
    """The live pipeline is missing a required component."""


class PortInUse(GreenGazeError):
    """The requested service port is already bound."""


# ---- CLI error families (mapped to fixed exit codes) ----

class UsageError(GreenGazeError):
    """Bad command line: unknown subcommand, missing/invalid arguments."""
    exit_code = 2


class ConfigError(GreenGazeError):
    """Bad configuration: invalid settings or referenced paths that do not exist."""
    exit_code = 3


class DataError(GreenGazeError):
    """Bad input data: malformed or missing rows, images, domains, or sessions."""
    exit_code = 4
