"""Exception hierarchy shared by all vidbank modules.

Every domain error derives from VidbankError so the service layer and CLI
can map failures to structured payloads and exit codes without string
matching.
"""


class VidbankError(Exception):
    """Base class for all vidbank errors."""


class ConfigError(VidbankError):
    """Invalid, unknown, or inconsistent configuration."""


class DataError(VidbankError):
    """Problems with datasets, clips, or on-disk artifacts."""


# --- data pipeline ---------------------------------------------------------

class InsufficientFrames(DataError):
    """Clip has fewer frames than the requested sampling window."""


class NonFiniteInput(DataError):
    """NaN or Inf encountered where finite values are required."""


class InvalidPolicy(ConfigError):
    """Augmentation policy is incompatible with the input frames."""


class ClipTooShort(DataError):
    """Clip cannot fill a single sliding window."""


class MissingTimestamp(DataError):
    """A clip used for failure-moment classification lacks its timestamp."""


# --- model / numerics ------------------------------------------------------

class ShapeMismatch(VidbankError):
    """Tensor shape disagrees with the configured architecture."""


class EmptySequence(VidbankError):
    """An aggregation was requested over zero time steps."""


class NonFiniteLogits(VidbankError):
    """Addressing logits contain NaN or Inf."""


class DimensionMismatch(VidbankError):
    """Memory bank and addressing distribution disagree on slot count."""


class ZeroVector(VidbankError):
    """L2 normalization requested on a zero-norm vector."""


class TooFewBlocks(VidbankError):
    """Sequence too short for the requested number of prediction steps."""


class DegenerateBatch(VidbankError):
    """Contrastive loss needs at least two candidates."""


class LengthMismatch(VidbankError):
    """Two vectors that must align have different lengths."""


class ZeroNormEmbedding(VidbankError):
    """Cosine distance is undefined for a zero-norm embedding."""


class InsufficientClasses(DataError):
    """Classifier training needs at least two distinct labels."""


# --- training / checkpoints ------------------------------------------------

class DivergedTraining(VidbankError):
    """Loss became NaN/Inf; training aborted with the last good checkpoint."""


class DataExhausted(DataError):
    """The dataset index has no usable entries for the requested split."""


class CorruptArchive(VidbankError):
    """Checkpoint archive cannot be parsed."""


class MissingParameter(VidbankError):
    """Checkpoint archive lacks a required parameter array."""


class UnexpectedParameter(VidbankError):
    """Checkpoint archive contains a parameter the model does not declare."""
