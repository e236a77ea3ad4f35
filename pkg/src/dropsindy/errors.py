"""Exception types raised across the package."""


class DropSindyError(Exception):
    """Base class for all package errors."""


class ParseError(DropSindyError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DropSindyError, ValueError):
    pass


class ConfigurationError(DropSindyError, ValueError):
    pass


class NotReachedError(DropSindyError, ValueError):
    """A fall distance was never reached by the trajectory."""

    def __init__(self, distance: float, max_descent: float):
        self.distance = distance
        self.max_descent = max_descent
        super().__init__(
            f"distance {distance:g} m not reached (max descent {max_descent:g} m)"
        )


class RangeError(DropSindyError, ValueError):
    def __init__(self, message: str, lower: float | None = None, upper: float | None = None):
        self.lower = lower
        self.upper = upper
        super().__init__(message)


class CalibrationError(DropSindyError, RuntimeError):
    pass


class SimulationError(DropSindyError, RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


class SearchError(DropSindyError, RuntimeError):
    pass
