"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``NumericalError`` subclasses -> 3, ``CoverageError`` -> 4.
"""


class HMomentsError(Exception):
    pass


class DimensionError(HMomentsError, ValueError):
    """Operands act on different numbers of qubits."""


class ContractError(HMomentsError, ValueError):
    """An input violates a documented precondition."""


class ResourceError(HMomentsError):
    """Requested dense object is too large."""


class ConfigError(HMomentsError, ValueError):
    pass


class CoverageError(HMomentsError, KeyError):
    """Expectation values are missing for some Pauli strings."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        shown = ", ".join(self.missing[:8])
        more = "" if len(self.missing) <= 8 else f" (+{len(self.missing) - 8} more)"
        super().__init__(f"no expectation value for {len(self.missing)} strings: {shown}{more}")

    def __str__(self):
        return self.args[0]


class NumericalError(HMomentsError, ArithmeticError):
    pass


class CalibrationError(NumericalError):
    def __init__(self, message, condition_number):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class DegenerateSubspaceError(NumericalError):
    pass


class CMXSingularityError(NumericalError):
    pass


class PDSDegeneracyError(NumericalError):
    pass


class ITENormalizationError(NumericalError):
    pass


class EstimatorDomainError(NumericalError):
    pass


class InsufficientMomentsError(ContractError):
    def __init__(self, required, available):
        super().__init__(f"need order >= {required}, have {available}")
        self.required = required
        self.available = available
