"""Exception hierarchy shared by all modules."""


class TwoTempError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TwoTempError, ValueError):
    """Invalid experiment configuration (names the offending key path)."""


class ValidationError(TwoTempError, ValueError):
    """An input violates a documented invariant."""


class DimensionError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ScopeError(ValidationError):
    """Operation requested outside the setting it is defined for."""


class CommutationError(ValidationError):
    pass


class DataError(ValidationError):
    """Not enough (valid) data for an estimator."""


class DegenerateError(DataError):
    pass


class NumericalError(TwoTempError, ArithmeticError):
    pass


class StabilityError(NumericalError):
    """Matrix not Hurwitz / not positive-stable, or step size too large."""


class DefinitenessError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass
