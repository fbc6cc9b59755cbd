"""Exception hierarchy shared by every module."""


class SamplingError(Exception):
    """Base class for all errors raised by sisampling."""


class SingularMatrix(SamplingError):
    pass


class UnsupportedRegime(SamplingError):
    """Raised for d > 1 together with N > 1.

    The subcube decomposition of the unit cube only tiles it when the
    dimension is one or there is a single subcube.
    """


class DomainMismatch(SamplingError):
    pass


class BoxTooSmall(SamplingError):
    pass


class DegenerateGenerators(SamplingError):
    pass


class OutOfReliableRegion(SamplingError):
    pass


class TruncationLoss(SamplingError):
    pass


class TruncationLossWarning(UserWarning):
    pass


class NotLeftInvertible(SamplingError):
    pass


class ShapeMismatch(SamplingError):
    pass


class MissingProvenance(SamplingError):
    pass


class ParseError(SamplingError):
    pass


class ValidationError(SamplingError):
    def __init__(self, message, rule=None):
        super().__init__(message)
        self.rule = rule
