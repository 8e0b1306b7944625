"""Exception hierarchy.

Every failure that the library can detect on purpose derives from
:class:`DichotomyLabError`, so drivers can record it per stage and carry on.
"""


class DichotomyLabError(Exception):
    """Base class for all library errors."""


class AmbientMismatch(DichotomyLabError, ValueError):
    pass


class DimensionMismatch(DichotomyLabError, ValueError):
    pass


class RankAmbiguous(DichotomyLabError):
    """No clear singular-value gap at the rank cut."""


class SpectrumOnContour(DichotomyLabError):
    """An eigenvalue sits on (or too close to) the integration contour."""


class NotHyperbolic(SpectrumOnContour):
    """Spectrum of the generator touches the imaginary axis."""


class BackwardTime(DichotomyLabError, ValueError):
    pass


class NonIntegerTime(DichotomyLabError, ValueError):
    pass


class OutOfWindow(DichotomyLabError, ValueError):
    pass


class NoSpectralGap(DichotomyLabError):
    pass


class NotAsymptoticallyConstant(DichotomyLabError):
    pass


class EstimateFailed(DichotomyLabError):
    pass


class SplitFailed(DichotomyLabError):
    pass


class GridMismatch(DichotomyLabError, ValueError):
    pass


class RawModeUnsupported(DichotomyLabError):
    pass


class UnstableTruncation(DichotomyLabError):
    """Defect numbers of the finite section change with the window size."""


class NoDichotomy(DichotomyLabError):
    pass


class GridMisaligned(DichotomyLabError, ValueError):
    pass


class NonHyperbolicEndpoint(NotHyperbolic):
    pass


class NonSymmetric(DichotomyLabError, ValueError):
    pass


class PerturbationNotVanishing(DichotomyLabError):
    pass


class HyperbolicityRequired(NotHyperbolic):
    pass


class MissingStage(DichotomyLabError, KeyError):
    pass


class ConfigError(DichotomyLabError, ValueError):
    """Malformed problem specification (exit code 2 at the command line)."""
