"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numeric/range failures exit 3, verification failures exit 4.
"""


class MercuryflowError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(MercuryflowError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class SchemaError(InvalidInputError):
    """A config file is malformed; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class QuadratureAccuracyError(MercuryflowError):
    """Numerical integration failed its self-consistency check.

    Carries both estimates so the caller can judge the disagreement.
    """

    def __init__(self, message: str, coarse: float, fine: float):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class TableBuildError(MercuryflowError):
    """A precomputed mmse table violates its invariants."""

    def __init__(self, message: str, indices: list[int] | None = None):
        super().__init__(message)
        self.indices = indices or []


class TableRangeError(MercuryflowError):
    """A query fell outside the snr range modeled by a table.

    Raised instead of extrapolating: silently extending an exponential
    tail corrupts power allocations.  Rebuild with a larger ``snr_max``
    (or accept that the requested water level exceeds the modeled range).
    """


class ConvergenceError(MercuryflowError):
    """An iterative solver ran out of iterations; carries the bracket."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class VerificationError(MercuryflowError):
    """An allocation failed optimality verification."""
