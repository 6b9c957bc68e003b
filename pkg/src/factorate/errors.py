class FactorateError(ValueError):
    """Base class for input/contract violations raised by this package."""


class ValidationError(FactorateError):
    pass


class DimensionError(FactorateError):
    pass


class RangeError(FactorateError):
    pass


class EmptyTargetError(FactorateError):
    pass


class EmptyCommonMeasurementsError(FactorateError):
    """No measurement has every unit under the same treatment."""
