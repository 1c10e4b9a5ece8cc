"""Exception types raised across the tracker."""


class McByteError(Exception):
    """Base class for every error raised by this package."""


class EmptyMask(McByteError):
    pass


class DegenerateBox(McByteError):
    pass


class SingularInnovation(McByteError):
    pass


class DegenerateGeometry(McByteError):
    pass


class InsufficientPoints(McByteError):
    pass


class UnknownTracklet(McByteError, KeyError):
    pass


class OutOfOrderFrame(McByteError):
    pass


class ProviderMismatch(McByteError):
    pass


class SlotDesync(McByteError):
    pass


class NonMonotonicFrames(McByteError):
    pass


class ParseError(McByteError):
    """Malformed input file. Carries the path and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")


class ConfigError(McByteError):
    pass
