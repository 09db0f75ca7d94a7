"""Exception hierarchy shared by all pipeline stages."""


class SdvTestError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SdvTestError):
    """Input document could not be parsed.

    ``line`` is 1-based, or ``None`` when the error is not tied to a line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.reason = message
        super().__init__(f"line {line}: {message}" if line is not None else message)
