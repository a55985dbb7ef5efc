"""Exception types. Each message starts with the stable error tag."""


class FrechetMoiError(Exception):
    """Base class; ``tag`` is the machine-readable error kind."""

    tag = "error"


class OrderExceededError(FrechetMoiError, ValueError):
    tag = "order-exceeded"


class NonpositiveEpsilonError(FrechetMoiError, ValueError):
    tag = "nonpositive-epsilon"


class EmptyGridError(FrechetMoiError, ValueError):
    tag = "empty-grid"


class DegenerateGridError(FrechetMoiError, ValueError):
    tag = "degenerate-grid"


class UnknownFunctionError(FrechetMoiError, KeyError):
    tag = "unknown-function"

    def __str__(self):
        return str(self.args[0]) if self.args else self.tag


class SmoothnessInsufficientError(FrechetMoiError, ValueError):
    tag = "smoothness-insufficient"


class NonHermitianError(FrechetMoiError, ValueError):
    tag = "non-hermitian-input"


class EigensolverError(FrechetMoiError, RuntimeError):
    tag = "eigensolver-failure"


class InvalidPError(FrechetMoiError, ValueError):
    tag = "invalid-p"


class DimensionMismatchError(FrechetMoiError, ValueError):
    tag = "dimension-mismatch"


class BudgetExceededError(FrechetMoiError, RuntimeError):
    tag = "budget-exceeded"


class StepTooSmallError(FrechetMoiError, ValueError):
    tag = "step-too-small"


class IndexOutOfRangeError(FrechetMoiError, IndexError):
    tag = "index-out-of-range"


class SchemaViolationError(FrechetMoiError, ValueError):
    tag = "schema-violation"
