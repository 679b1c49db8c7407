"""Exception hierarchy shared by all cmnlearn modules."""


class CmnError(Exception):
    """Base class for all cmnlearn errors."""


class FormatError(CmnError):
    """A file is malformed (ragged rows, empty input, bad JSON shape)."""


class DataParseError(CmnError):
    """A cell value cannot be interpreted; carries its 1-based location."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class CapacityError(CmnError):
    """A dense table or blanket enumeration would exceed its configured cap."""


class StructureError(CmnError):
    """A contextual structure violates its invariants (stale or invalid contexts)."""


class FitError(CmnError):
    """Maximum-likelihood fitting failed to converge; carries the last gradient norm."""

    def __init__(self, message: str, gradient_norm: float | None = None):
        if gradient_norm is not None:
            message = f"{message} (last gradient norm {gradient_norm:.3e})"
        super().__init__(message)
        self.gradient_norm = gradient_norm
