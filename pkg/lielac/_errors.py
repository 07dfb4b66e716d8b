__all__ = [
    'LieLacError',
    'SingularTransform',
    'DegenerateDomain',
    'NonFiniteEnergy',
    'NoFiniteStart',
    'CanonicalizationFailed',
    'GridMismatch',
    'NotPeriodic',
    'NonZeroMean',
    'UnstableStep',
    'ConfigError',
]


class LieLacError(Exception):
    """Base class for errors raised by lielac"""


class SingularTransform(LieLacError, ValueError):
    """The group element sends a time slice through the projective singularity gamma*t + delta = 0"""


class DegenerateDomain(LieLacError, ValueError):
    """A transformed spatial domain collapsed to (almost) zero length"""


class NonFiniteEnergy(LieLacError, ArithmeticError):
    """An energy evaluation hit the sentinel value or a singular transform"""


class NoFiniteStart(LieLacError, RuntimeError):
    """The energy is not finite at any initialization"""


class CanonicalizationFailed(LieLacError, RuntimeError):
    """The canonical instance does not reach the operator's training domain"""


class GridMismatch(LieLacError, ValueError):
    """Two fields were compared on different grids"""


class NotPeriodic(LieLacError, ValueError):
    """A periodic solver received a field without the periodic flag"""


class NonZeroMean(LieLacError, ValueError):
    """The Cole-Hopf Burgers solver received an initial condition with nonzero mean"""


class UnstableStep(LieLacError, ValueError):
    """A time step violates the solver's step bound"""


class ConfigError(LieLacError, ValueError):
    """A run configuration failed validation"""
