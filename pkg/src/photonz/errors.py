"""Exception hierarchy shared by all photonz modules."""


class PhotonzError(Exception):
    """Base class for every error raised by photonz."""


class InvalidArgumentError(PhotonzError, ValueError):
    pass


class TruncationError(PhotonzError, ValueError):
    """Probability mass beyond the truncation bound exceeds the tolerance."""

    def __init__(self, message, required_nmax=None):
        super().__init__(message)
        self.required_nmax = required_nmax


class IllConditionedError(PhotonzError, ArithmeticError):
    pass


class NumericalFailure(PhotonzError, ArithmeticError):
    """A non-finite quantity appeared during an iterative computation."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class CalibrationError(PhotonzError, ValueError):
    pass


class ParseError(PhotonzError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line
