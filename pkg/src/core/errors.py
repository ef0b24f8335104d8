"""
Exception hierarchy for the spectral lab.
"""


class SpectralLabError(Exception):
    """Base class for every error raised by the lab."""


class ConfigInvalid(SpectralLabError, ValueError):
    """A scenario, sweep or training configuration failed validation."""


# Graph errors

class GraphError(SpectralLabError):
    pass


class ZeroDegree(GraphError):
    """A vertex has non-positive degree; prune isolated vertices first."""


class NotSymmetric(GraphError):
    pass


class NoConvergence(GraphError):
    """The eigensolver hit its rotation cap."""


class DimensionMismatch(GraphError, ValueError):
    pass


class GraphTooLarge(GraphError):
    pass


# Label model errors

class LabelModelError(SpectralLabError):
    pass


class NoiseRateOutOfRange(LabelModelError, ValueError):
    pass


class InvalidClassCount(LabelModelError, ValueError):
    pass


class NotClassBalanced(LabelModelError):
    pass


class AsymmetricNoise(LabelModelError):
    """A closed form that needs symmetric label noise got a generic transition matrix."""


# Training errors

class TrainingError(SpectralLabError):
    pass


class Diverged(TrainingError):
    pass


class SamplerUnderflow(TrainingError):
    pass


class ThetaOutOfRange(SpectralLabError, ValueError):
    pass


# Bound errors

class BoundError(SpectralLabError):
    pass


class DegenerateDenominator(BoundError):
    pass


class IndexOutOfRange(BoundError, IndexError):
    pass


class UndefinedThreshold(BoundError):
    pass


class EmptyKRange(BoundError):
    pass


class BoundPreconditionError(BoundError, ValueError):
    pass


class NotDeterministicScenario(BoundError):
    pass


class SingularSystem(SpectralLabError):
    """The regularised normal matrix of a probe fit is numerically singular."""
