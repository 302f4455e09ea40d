"""Exception hierarchy shared by every module.

Each exception carries an ``exit_code`` used by the command-line front end:
2 for failed checks, 3 for precision exhaustion and 4 for bad input.
"""


class BicriticalError(Exception):
    exit_code = 2


class BadInput(BicriticalError):
    exit_code = 4


class RationalInput(BadInput):
    pass


class DegenerateParameter(BadInput):
    pass


class NotHomeomorphism(BadInput):
    pass


class WrongCriticalCount(BadInput):
    pass


class PrecisionExhausted(BicriticalError):
    exit_code = 3


class DepthExceeded(PrecisionExhausted):
    pass


class PeriodicOrbitDetected(BicriticalError):
    pass


class ConvergenceFailure(BicriticalError):
    pass


class BracketFailure(BicriticalError):
    pass


class TuneFailure(BicriticalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CapExceeded(BicriticalError):
    pass


class NotRenormalizable(BicriticalError):
    pass


class DegenerateOrbit(BicriticalError):
    pass


class NotFound(BicriticalError):
    pass


class ConsistencyFailure(BicriticalError):
    pass


class TooShort(BicriticalError):
    pass


class AddressMissing(BicriticalError):
    pass


class OrderViolation(BicriticalError):
    pass


class NearCriticalSample(BicriticalError):
    pass


class DomainMismatch(BadInput):
    pass
