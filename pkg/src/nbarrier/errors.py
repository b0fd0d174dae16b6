"""Exception hierarchy shared by all nbarrier modules."""


class NBarrierError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NBarrierError, ValueError):
    """A point lies outside the nonnegative orthant."""


class NegativeCoordinate(DomainError):
    pass


class NotAnEquilibrium(NBarrierError):
    pass


class EmptyNullcline(NBarrierError):
    def __init__(self, message, label=None, witness=None):
        super().__init__(message)
        self.label = label
        self.witness = witness


class FitError(NBarrierError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DegenerateFit(FitError):
    pass


class OrderViolation(FitError):
    pass


class NoConvergence(NBarrierError):
    pass


class JacobianSingular(NBarrierError):
    pass


class PhaseDegenerate(NBarrierError):
    pass


class BlowUp(NBarrierError):
    pass


class FrontTooClose(NBarrierError):
    pass


class NoCrossing(NBarrierError):
    pass


class DimensionMismatch(NBarrierError, ValueError):
    pass


class ConfigError(NBarrierError):
    pass
