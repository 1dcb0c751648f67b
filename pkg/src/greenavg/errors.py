"""Exception hierarchy.

Every error carries a short ``code`` used by the CLI for its one-line
diagnostic, and an ``exit_code`` (2 for invalid input, 3 for numerical
failure).
"""


class GreenAvgError(Exception):
    code = "Error"
    exit_code = 2


class ValidationError(GreenAvgError, ValueError):
    code = "ValidationError"


class ConfigError(ValidationError):
    code = "ConfigError"


class GridMismatch(ValidationError):
    code = "GridMismatch"


class NonCommensurateShift(ValidationError):
    code = "NonCommensurateShift"


class EmptyOverlap(ValidationError):
    code = "EmptyOverlap"


class WindowTooLong(ValidationError):
    code = "WindowTooLong"


class DomainTooShort(ValidationError):
    code = "DomainTooShort"


class OmegaTableTooCoarse(ValidationError):
    code = "OmegaTableTooCoarse"


class HorizonTooShort(ValidationError):
    code = "HorizonTooShort"


class NumericalError(GreenAvgError, ArithmeticError):
    code = "NumericalError"
    exit_code = 3


class NotHyperbolic(NumericalError):
    code = "NotHyperbolic"


class NumericalFailure(NumericalError):
    code = "NumericalFailure"


class ContractionViolated(NumericalError):
    code = "ContractionViolated"


class StationaryContractionViolated(ContractionViolated):
    code = "StationaryContractionViolated"


class MaxIterExceeded(NumericalError):
    code = "MaxIterExceeded"
