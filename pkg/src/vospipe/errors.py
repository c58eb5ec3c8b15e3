"""Exception hierarchy shared across the toolkit.

Exit-code mapping for the CLI: usage/config errors exit 2, data errors
exit 3, adapter (propagator) errors exit 4.
"""

from __future__ import annotations


class VospipeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VospipeError):
    """Invalid configuration value or unusable flag combination."""


class DataError(VospipeError):
    """Base class for errors caused by bad input data."""


class DimensionMismatch(DataError):
    """Two masks (or a mask and its video) disagree on width/height."""


class MalformedRle(DataError):
    """RLE counts violate the codec invariants."""


class SequenceMismatch(DataError):
    """Two mask sequences disagree on frame count or dimensions."""


class EmptyInput(DataError):
    """An aggregate was requested over an empty collection."""


class EmptyTrack(DataError):
    """A confidence track with zero frames."""


class NTooLarge(DataError):
    """Requested more key frames than the track has frames."""


class InconsistentSet(DataError):
    """Prediction-set members disagree on identity, length or dimensions."""


class MissingPrediction(DataError):
    """A split entry has no matching predicted sequence."""


class ConflictingAnnotation(DataError):
    """The same (video, expression) key is bound to two different masks."""


class NotFound(DataError):
    """A referenced file or directory does not exist."""


class ParseError(DataError):
    """A manifest or mask file is malformed.

    Carries the offending path so CLI errors name the file.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class PropagatorFailure(VospipeError):
    """The propagation adapter crashed or violated the wire protocol."""
