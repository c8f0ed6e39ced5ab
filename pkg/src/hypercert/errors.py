"""Exception types shared across the toolkit."""


class HypercertError(Exception):
    """Base class for all toolkit errors."""


class MalformedFile(HypercertError):
    """A file does not conform to its declared format."""


class NonFiniteValue(HypercertError):
    """A vector component is NaN or infinite."""


class DuplicateId(HypercertError):
    """Two records share the same id."""


class IoFailure(HypercertError):
    """Reading or writing a file failed at the OS level."""


class DimMismatch(HypercertError):
    """Vector/box/network dimensions do not agree."""


class EmptyInput(HypercertError):
    """An operation that needs at least one point received none."""


class DegenerateInput(HypercertError):
    """Input is too degenerate for the operation (e.g. < 2 points for a rotation fit)."""


class KTooLarge(HypercertError):
    """Requested more clusters than there are points."""


class SearchExhausted(HypercertError):
    """No k in the scanned range produced a negative-free clustering."""

    def __init__(self, message, best_k, residual_negatives):
        super().__init__(message)
        self.best_k = best_k
        self.residual_negatives = residual_negatives


class RejectionExhausted(HypercertError):
    """Complement sampling acceptance rate fell below the cutoff."""


class ConstraintViolation(HypercertError):
    """An attack start point does not satisfy its constraint."""


class MisclassifiedPoint(HypercertError):
    """The center of an epsilon search is not classified as the target class."""


class Divergence(HypercertError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


class BadSpec(HypercertError):
    """A layer/network/synthesis specification is invalid."""


class ConfigError(HypercertError):
    """An experiment configuration is missing or malformed.

    Carries the dotted config key so command-line output can point at the
    offending line.
    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class ProvenanceMismatch(HypercertError):
    """Artifacts produced under different configurations were mixed."""
