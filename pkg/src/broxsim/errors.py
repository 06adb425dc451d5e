"""Exception types shared across the package."""


class OutOfDomainError(ValueError):
    """A spatial coordinate or scale value lies outside the tabulated grid."""


class EnvironmentFormatError(ValueError):
    """An environment file is malformed or violates an invariant."""


class HorizonExceededError(RuntimeError):
    """A path simulation exhausted its step budget before its stop rule fired.

    ``replicate`` carries the replicate index when the error is raised from a
    replicated batch, otherwise it is None.
    """

    def __init__(self, message, steps=None, replicate=None):
        super().__init__(message)
        self.steps = steps
        self.replicate = replicate
