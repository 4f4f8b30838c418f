"""Exception hierarchy shared by all twinkit modules."""


class TwinError(Exception):
    """Base class for every error raised by twinkit."""


# --- data store ---

class NonMonotonicTime(TwinError):
    """Ingested sample does not advance the store's timeline."""


class SchemaMismatch(TwinError):
    """Vector length or column set does not match the signal schema."""


class IndexOutOfRange(TwinError):
    """Signal index outside 0..n-1."""


class TimeOutOfRange(TwinError):
    """Query time outside the recorded range."""


class EmptyStore(TwinError):
    """Operation requires at least one stored sample."""


# --- prediction ---

class NotFitted(TwinError):
    """Prediction requested before fit_backend."""


class EmptyHistory(TwinError):
    """fit_backend called with no samples."""


class EmptyWindow(TwinError):
    """extrapolate_dynamic called with an empty window."""


class NonMonotonicWindow(TwinError):
    """Window timestamps are not strictly increasing."""


class InvalidHorizon(TwinError):
    """Prediction horizon must be > 0."""


class WindowTooShort(TwinError):
    """Dynamic anomaly scoring needs at least two samples."""


class IncompleteVector(TwinError):
    """Operation requires a fully populated signal vector."""


class UnknownComponent(TwinError):
    """Component id not registered with the twin."""


class UnknownMode(TwinError):
    """Failure mode not declared for the component."""


# --- causality ---

class ZeroCoefficientVector(TwinError):
    """Halfspace coefficient vector must not be all zero."""


class EmptyRegion(TwinError):
    """A concept needs at least one inequality."""


class DanglingReference(TwinError):
    """A definition references an id that does not exist."""


class UnknownConcept(TwinError):
    """Concept id not registered."""


class UnknownProduct(TwinError):
    """Product id not registered."""


# --- diagnosis / planning ---

class SizeLimitExceeded(TwinError):
    """Search space larger than the guard allows."""


class InputsUnavailable(TwinError):
    """Process step inputs not contained in the current multiset."""


class NoPlanFound(TwinError):
    """No step sequence reaches the goal within the depth bound."""


# --- simulator / harness ---

class InvalidScenario(TwinError):
    """Scenario fields fail validation."""


class EmptyInput(TwinError):
    """Evaluation called with no scored points."""


class ParseError(TwinError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IoError(TwinError):
    """Filesystem failure while reading or writing artifacts."""
