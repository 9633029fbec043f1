"""Exception hierarchy shared across the package."""


class PedTrialError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(PedTrialError, ValueError):
    """A scalar parameter is outside its valid domain."""


class InvalidGeometryError(PedTrialError, ValueError):
    """A placement request has no valid geometric solution."""


class InvalidConfigError(PedTrialError, ValueError):
    """A configuration combination is internally inconsistent."""


class GenerationFailureError(PedTrialError, RuntimeError):
    """Randomized generation could not satisfy its constraints."""


class RejectedInputError(PedTrialError, ValueError):
    """A subject input frame was malformed and was not applied."""


class EngineStateError(PedTrialError, RuntimeError):
    """An engine operation was requested in an incompatible phase."""


class InsufficientDataError(PedTrialError, ValueError):
    """Not enough observations to compute the requested quantity."""


class DegenerateSampleError(PedTrialError, ValueError):
    """Sample has zero variance (or a zero margin) where spread is required."""


class SeparationError(PedTrialError, RuntimeError):
    """Logistic fit diverged: outcome classes are perfectly separable."""


class NonNestedModelError(PedTrialError, ValueError):
    """Likelihood-ratio comparison requested for non-nested models."""


class StoreError(PedTrialError):
    """Base class for persistence errors."""


class SchemaVersionError(StoreError):
    """File declares a schema version this build cannot read."""


class IntegrityError(StoreError):
    """File is truncated or corrupt.

    ``byte_offset`` locates the first unreadable byte; records before it
    were parsed successfully and are available to lenient readers.
    """

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class ParseError(PedTrialError, ValueError):
    """A structured text file failed to parse.

    ``line`` is the 1-based line number of the offending content when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ProtocolError(PedTrialError):
    """A wire message violated the session protocol."""

    def __init__(self, message: str, code: str = "protocol_violation"):
        super().__init__(message)
        self.code = code
