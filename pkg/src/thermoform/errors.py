"""Exception hierarchy shared by all modules."""


class ThermoformError(Exception):
    """Base class for library errors."""


class UnknownFamilyError(ThermoformError, KeyError):
    pass


class NotHyperbolicError(ThermoformError, ValueError):
    """Parameter outside the verified hyperbolic range of a family."""


class DomainError(ThermoformError, ValueError):
    """A mathematical quantity is undefined (pole, metric singularity, ...)."""


class DivergentSumError(DomainError):
    pass


class NotTameError(DomainError):
    pass


class PoleError(DomainError):
    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class EmptyLevelError(ThermoformError, ValueError):
    pass


class BracketError(ThermoformError, RuntimeError):
    def __init__(self, msg, samples=None):
        super().__init__(msg)
        self.samples = samples or []


class NotConvergedWarning(UserWarning):
    pass
