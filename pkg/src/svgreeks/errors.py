"""Exception hierarchy. Each class carries the CLI exit code of its error class."""


class SVGreeksError(Exception):
    exit_code = 1


class ConfigurationError(SVGreeksError, ValueError):
    exit_code = 2


class UnsupportedGreekError(ConfigurationError):
    """Requested Greek needs machinery the model does not provide."""


class ContractViolation(SVGreeksError, ValueError):
    exit_code = 2


class NumericError(SVGreeksError, ArithmeticError):
    exit_code = 3


class SingularVolatilityError(NumericError):
    def __init__(self, t, y, step=None):
        self.t = t
        self.y = y
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"sigma(y) == 0{where} (t={t!r}, y={y!r})")


class NumericOverflowError(NumericError):
    pass


class DegenerateDenominatorError(NumericError):
    """Too many paths with |int u L dt| below the denominator threshold."""


class EmptySampleError(NumericError):
    pass


class ThirdOrderDisabledError(UnsupportedGreekError):
    """Higher-order Malliavin fields requested on a state-dependent vol-of-vol model."""


class OracleGateFailure(SVGreeksError):
    exit_code = 4


class ReportIOError(SVGreeksError, OSError):
    exit_code = 5
