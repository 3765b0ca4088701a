"""Exception types shared across the package."""


class TangentLabError(Exception):
    """Base class for all package errors."""


class ShapeError(TangentLabError):
    """Input has the wrong shape or is not (symmetric, square, ...) as required."""


class DomainError(TangentLabError):
    """Input value outside the mathematical domain of an operation."""


class ConfigError(TangentLabError):
    """Invalid model / training / experiment configuration."""


class ParseError(TangentLabError):
    """Malformed file content. Carries a line number when one is known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SingularMatrixError(TangentLabError):
    """Matrix is singular or indefinite where positive definiteness is required."""


class NumericError(TangentLabError):
    """Numerical failure at runtime (divergence, non-finite gradient).

    ``step`` holds the training step index when the failure happened inside
    a training loop.
    """

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class BoundVacuousError(DomainError):
    """A spectral bound degenerates (eta >= 1) and carries no information."""


class EnumerationLimitError(DomainError):
    """Subset enumeration would explode; reduce candidates or max_subset_size."""
