"""Exception and warning classes shared across fracwave."""


class FracwaveError(Exception):
    """Base class for all library errors."""


class NumericalError(FracwaveError):
    """A numerical routine could not deliver a trustworthy result."""


class NonConvergence(NumericalError):
    pass


class Overflow(NumericalError):
    pass


class RegionViolation(NumericalError, ValueError):
    """Evaluation requested outside the region where a method is reliable."""


class NotTempered(FracwaveError, ValueError):
    """gamma < alpha: the propagator symbol grows exponentially."""


class ShapeMismatch(FracwaveError, ValueError):
    pass


class BandUnresolvable(FracwaveError, ValueError):
    """Dyadic band lies outside the frequencies the grid can represent."""


class TailDominates(NumericalError):
    pass


class InsufficientData(FracwaveError, ValueError):
    pass


class QuadratureUnstable(NumericalError):
    pass


class AccuracyLoss(UserWarning):
    pass


class TruncationRisk(UserWarning):
    pass
