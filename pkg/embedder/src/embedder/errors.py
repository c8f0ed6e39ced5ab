"""Exception taxonomy for the extraction pipeline.

Everything raised on purpose derives from EmbedderError so the CLI can
separate expected validation failures from genuine bugs.
"""


class EmbedderError(Exception):
    """Base class for expected failures."""


class MalformedFile(EmbedderError):
    """Structurally bad input or output file (header, arity, truncation)."""


class UnknownLabel(EmbedderError):
    """A raw label or split value outside the supported vocabulary."""


class EncoderUnavailable(EmbedderError):
    """The requested sentence encoder cannot be constructed here."""


class NonFiniteValue(EmbedderError):
    """An embedding component is NaN or infinite."""


class DimMismatch(EmbedderError):
    """Vector length disagrees with the declared dimension."""


class DuplicateId(EmbedderError):
    """Two records share an id."""
