"""Exception types shared across the package."""


class KamoeError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(KamoeError):
    """Operands have incompatible shapes for the requested operation."""


class ConfigError(KamoeError):
    """A configuration value is out of range or inconsistent."""


class ContractError(KamoeError):
    """An operation was called outside its contract (e.g. backward on a non-scalar)."""


class ParseError(KamoeError):
    """A CSV row could not be parsed; carries the offending row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DegenerateSeriesError(KamoeError):
    """A series has a zero moving median and cannot be ratio-normalized."""


class DegenerateColumnError(KamoeError):
    """A constant column cannot be min-max scaled."""


class DegenerateTargetError(KamoeError):
    """A zero-variance target makes R^2 undefined."""


class DivergenceError(KamoeError):
    """Training produced a non-finite loss; carries the epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
