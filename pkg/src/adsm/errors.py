"""Exception hierarchy shared across the package."""


class AdsmError(Exception):
    """Base class for all package-specific errors."""


class FormatError(AdsmError):
    """A text input file violates its documented format.

    Carries the offending line number when available.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class InfeasibleUtteranceError(AdsmError):
    """The posterior sequence is too short to realize any accepted path."""


class NumericalError(AdsmError):
    """Non-finite values or divergence encountered where finite math is required."""
