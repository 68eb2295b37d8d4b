"""Exception hierarchy shared across the toolkit."""


class TrendlensError(Exception):
    """Base class for all toolkit errors."""


class MalformedConfig(TrendlensError):
    """Config text could not be parsed at all."""


class MissingField(TrendlensError):
    def __init__(self, field: str):
        super().__init__(f"missing required field: {field}")
        self.field = field


class InvalidPeriodSpec(TrendlensError):
    pass


class InsufficientHistory(TrendlensError):
    pass


class Aborted(TrendlensError):
    pass


class SchemaMismatch(TrendlensError):
    def __init__(self, column: str, table: str = ""):
        where = f" in {table}" if table else ""
        super().__init__(f"missing column {column!r}{where}")
        self.column = column


class EmptySnapshot(TrendlensError):
    pass


class NotJson(TrendlensError):
    """Backend response was not a JSON object; retryable."""


class TransportError(TrendlensError):
    """Backend call failed before producing a response; retryable."""


class RateLimited(TransportError):
    pass


class ConfigError(TrendlensError):
    pass


class NoSources(TrendlensError):
    pass


class BoundsCrossed(TrendlensError):
    pass


class NonPositive(TrendlensError):
    pass


class InvalidBounds(TrendlensError):
    pass


class NotDivergent(TrendlensError):
    pass


class EmptyInput(TrendlensError):
    pass


class LengthMismatch(TrendlensError):
    pass


class UnknownLabel(TrendlensError):
    pass


class EmptyStratum(TrendlensError):
    pass


class NoComparablePairs(TrendlensError):
    pass


class InvalidConfig(TrendlensError):
    pass


class WrongPeriodCount(TrendlensError):
    pass


class UnknownMq(TrendlensError):
    pass


class SingleEntry(TrendlensError):
    pass


class DuplicateEntry(TrendlensError):
    pass


class ReportSchemaError(TrendlensError):
    pass
