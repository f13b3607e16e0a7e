"""Exception hierarchy shared by all blowuplab modules."""


class BlowupLabError(Exception):
    """Base class for every error raised by this package."""


# spectral
class NonDiagonalizable(BlowupLabError):
    pass


class NonPositiveSpectrum(BlowupLabError):
    pass


class UnknownEigenvalue(BlowupLabError):
    pass


class DimensionMismatch(BlowupLabError, ValueError):
    pass


# homogeneous
class ZeroVector(BlowupLabError, ValueError):
    pass


class NonPositiveValueDetected(BlowupLabError):
    pass


# envelope
class DivergentIntegral(BlowupLabError):
    pass


class InsufficientSamples(BlowupLabError):
    pass


class HypothesisViolated(BlowupLabError):
    pass


# problem
class ZeroState(BlowupLabError):
    pass


class UnboundedPerturbation(BlowupLabError):
    pass


class CorrectorVanishes(BlowupLabError):
    pass


# integrator
class ImmediateDomainExit(BlowupLabError):
    pass


class NonFiniteState(BlowupLabError):
    pass


class NotOnEigenray(BlowupLabError):
    pass


# asymptotics
class InsufficientGrowth(BlowupLabError):
    pass


class NonAffineTail(BlowupLabError):
    pass


class AmbiguousLimit(BlowupLabError):
    pass


class WindowTooShort(BlowupLabError):
    pass


class AllErrorsAtNoiseFloor(BlowupLabError):
    """Convergence too fast to classify; callers report it instead of failing."""


# cli / io
class ConfigError(BlowupLabError, ValueError):
    pass


class NoDecay(BlowupLabError):
    """Error series does not decrease towards the singularity."""
