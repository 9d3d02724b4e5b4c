"""Exception types raised by the library."""


class BDLossError(ValueError):
    """Base class for all library errors."""


class InvalidBoxError(BDLossError):
    pass


class InvalidPolicyError(BDLossError):
    pass


class SingularCovarianceError(BDLossError):
    pass


class DegenerateQuadError(BDLossError):
    pass


class InsufficientDataError(BDLossError):
    pass


class MalformedLineError(BDLossError):
    """A DOTA label line could not be parsed.

    ``lineno`` is 1-based and ``source`` names the file when known.
    """

    def __init__(self, message, lineno, source=None):
        self.lineno = lineno
        self.source = source
        where = f"{source}:{lineno}" if source else f"line {lineno}"
        super().__init__(f"{where}: {message}")
