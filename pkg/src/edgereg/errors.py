"""Exception types shared across the pipeline."""


class EdgeRegError(Exception):
    """Base class for all package errors."""


class BehindCamera(EdgeRegError):
    """A point has non-positive camera depth and cannot be imaged."""


class InvalidAperture(EdgeRegError, ValueError):
    pass


class ImageTooSmall(EdgeRegError, ValueError):
    pass


class OutOfBounds(EdgeRegError, ValueError):
    """A sample location lies outside the cost map grid."""


class InsufficientResiduals(EdgeRegError):
    """Fewer active residuals than pose degrees of freedom."""

    def __init__(self, active: int, required: int = 6, culled: dict | None = None):
        self.active = active
        self.required = required
        self.culled = dict(culled or {})
        super().__init__(f"only {active} active residuals, need at least {required}")


class ParseError(EdgeRegError, ValueError):
    """Malformed input file; carries the offending file and line."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")
