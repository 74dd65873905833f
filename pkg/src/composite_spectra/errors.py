class DomainError(ValueError):
    """An argument lies outside the domain of a special function or kernel."""


class DimensionError(ValueError):
    """Matrix shapes or basis tags do not chain."""


class ConvergenceError(RuntimeError):
    """
    An iterative solver failed to converge.
    :param message: Human readable description of the failure.
    :param bracket: The search interval at the moment of failure, if any.
    """

    def __init__(self, message: str, bracket: tuple[str, str] | None = None):
        super().__init__(message)
        self.bracket = bracket
