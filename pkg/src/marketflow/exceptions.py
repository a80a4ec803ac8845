"""Exception and warning types raised across the package."""


class MarketflowError(Exception):
    """Base class for all data and model errors."""


class ParseError(MarketflowError, ValueError):
    def __init__(self, row, column, message="malformed cell"):
        self.row = row
        self.column = column
        super().__init__(f"ParseError: {message} at row {row}, column {column!r}")


class EmptyPanel(MarketflowError, ValueError):
    pass


class DegenerateSeries(MarketflowError, ValueError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"DegenerateSeries: series {label!r} is constant")


class InsufficientSamples(MarketflowError, ValueError):
    pass


class UnknownLabel(MarketflowError, KeyError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"UnknownLabel: {label!r}")

    def __str__(self):
        return self.args[0]


class RankDeficient(MarketflowError, ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"RankDeficient: collinear predictor columns {self.columns}")


class NonPositiveVariance(MarketflowError, ValueError):
    pass


class StateSpaceTooLarge(MarketflowError, ValueError):
    pass


class NonStationary(MarketflowError, ValueError):
    def __init__(self, radius):
        self.radius = radius
        super().__init__(f"NonStationary: companion spectral radius {radius:.12g} >= 1")


class EmptyGraph(MarketflowError, ValueError):
    pass


class ConfigError(MarketflowError, ValueError):
    def __init__(self, key, message="invalid value"):
        self.key = key
        super().__init__(f"ConfigError({key!r}): {message}")


class DroppedRowsWarning(UserWarning):
    """More than 5% of input rows were discarded during ingest."""


class SmallSampleWarning(UserWarning):
    """Too few samples for the occupied joint state space."""
