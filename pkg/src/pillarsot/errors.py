"""Exception hierarchy shared across the package."""


class PillarSotError(Exception):
    """Base class for every error raised by this package."""


# --- point cloud / sequence ingestion ---

class TruncatedRecordError(PillarSotError):
    """Binary point cloud file length is not a multiple of the record size."""


class NonFiniteValueError(PillarSotError):
    """NaN or Inf encountered where finite values are required."""


class MalformedLineError(PillarSotError):
    """A manifest line failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MissingCloudFileError(PillarSotError):
    """A manifest references a point cloud file that does not exist."""


class EmptyInputError(PillarSotError):
    """An operation that requires at least one element got none."""


class DegenerateRegionError(PillarSotError):
    """Crop region has min >= max on some axis."""


# --- pillar grid ---

class DuplicateIndexError(PillarSotError):
    """Two pillar vectors were scattered to the same grid cell."""


class IndexOutOfGridError(PillarSotError):
    """A pillar index lies outside the H x W grid."""


# --- pyramid encoding ---

class NonFiniteInputError(PillarSotError):
    """Pyramid encoder input must be finite."""


class SpecMismatchError(PillarSotError):
    """A pyramid code was decoded with a different spec than produced it."""


class ChannelOutOfRangeError(PillarSotError):
    """A selected feature channel index is out of range."""


class WidthMismatchError(PillarSotError):
    """Two feature sets have different channel widths."""


# --- backbone ---

class ShapeMismatchError(PillarSotError):
    """Tensor shapes are inconsistent with the configuration."""


class NonFiniteActivationError(PillarSotError):
    """NaN/Inf appeared in a forward pass; carries stage/block location."""

    def __init__(self, stage: int, block: int | None, message: str = ""):
        where = f"stage {stage}" + ("" if block is None else f", block {block}")
        super().__init__(f"non-finite activation at {where}. {message}".strip())
        self.stage = stage
        self.block = block


class CorruptWeightFileError(PillarSotError):
    """Weight file failed magic or checksum validation."""


class ShapeMismatchOnLoadError(PillarSotError):
    """Weight file does not match the requested backbone configuration."""


# --- flops ---

class InvalidResolutionError(PillarSotError):
    """Input resolution is not divisible by the cumulative stride."""


# --- harness ---

class InvalidParamsError(PillarSotError):
    """Synthetic sequence parameters are out of range."""
