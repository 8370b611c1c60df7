"""Exception hierarchy shared by every module."""


class WfsError(Exception):
    """Base class for toolkit errors."""


class ArgumentError(WfsError, ValueError):
    pass


class AlignmentError(ArgumentError):
    """Grid resolution does not line up with the requested dyadic levels."""

    def __init__(self, axis, message):
        self.axis = axis
        super().__init__(f"axis {axis}: {message}")


class DomainError(WfsError, ValueError):
    pass


class InvariantError(WfsError, ValueError):
    pass


class ConstructionError(WfsError, ValueError):
    pass


class CoverageError(WfsError, ValueError):
    pass


class PreconditionError(WfsError, ValueError):
    pass


class DependencyError(WfsError, RuntimeError):
    pass


class DivergenceError(WfsError, RuntimeError):
    pass


class BackendError(WfsError, ValueError):
    pass


class DegenerateInputError(WfsError, ValueError):
    pass
