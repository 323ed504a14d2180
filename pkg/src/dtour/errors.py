"""Exception and warning types shared across the package."""


class DtourError(Exception):
    """Base class for all package errors."""


class DegenerateBasis(DtourError):
    """A matrix cannot be orthonormalized because it lost rank 2."""


class DimensionMismatch(DtourError):
    """Operands disagree on the number of data dimensions."""


class DegeneratePointSet(DtourError):
    """A point set has zero total variance and cannot be aligned."""


class DegenerateResidual(DtourError):
    """No residual direction exists outside the current view plane."""


class AxisNotOrthogonal(DtourError):
    """A rotation axis is not orthogonal to the view plane."""


class TooFewKeyframes(DtourError):
    """A tour needs at least two keyframes."""


class LengthMismatch(DtourError):
    """Point sets in a sequence do not share the same number of rows."""


class TooManyPoints(DtourError):
    """Dataset exceeds the exact-solver size limit; subsample first."""


class ParseError(DtourError):
    """A text file failed to parse.

    Carries the 1-based line number and the offending column name/index.
    """

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class MissingColumn(DtourError):
    """A declared column is absent from the input."""


class EmptyDataset(DtourError):
    """An ingestion or snapshot operation received zero rows."""


class BadMagic(DtourError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedFile(DtourError):
    """A binary file ends before its declared payload."""


class VersionUnsupported(DtourError):
    """A file declares a format version this build cannot read."""


class SchemaError(DtourError):
    """A tour file does not match the expected JSON schema."""


class OrthonormalityViolation(DtourError):
    """A stored basis drifted too far from orthonormality to repair.

    Carries the keyframe index and the measured drift magnitude.
    """

    def __init__(self, message, keyframe=None, drift=None):
        super().__init__(message)
        self.keyframe = keyframe
        self.drift = drift


class BadPolygon(DtourError):
    """A lasso polygon has fewer than three vertices."""


class BindFailure(DtourError):
    """The session server could not bind its address."""


class ProtocolViolation(DtourError):
    """A session peer sent a malformed or out-of-order message."""


class RankDeficientWarning(UserWarning):
    """Fewer informative directions exist than were requested."""


class DisconnectedGraphWarning(UserWarning):
    """The neighbor graph was disconnected and has been patched."""


class SingleKeyframeWarning(UserWarning):
    """A generated sequence collapsed to a single distinct view plane."""


class DroppedRowsWarning(UserWarning):
    """Rows with non-finite embedded values were dropped during ingestion."""


class ConstantColumnWarning(UserWarning):
    """A column had no spread and was zeroed during standardization."""
