"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid argument, inconsistent dimensions, or malformed input data."""


class CsvFormatError(ValidationError):
    """Malformed CSV content; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or hit a degenerate state."""


class DegreeCapError(RuntimeError):
    """Exact deletion-subset enumeration refused: feasible neighbourhood too large."""
