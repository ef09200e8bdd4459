class TopGeoError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TopGeoError, ValueError):
    pass


class ConfigError(TopGeoError, ValueError):
    pass


class CardinalityError(TopGeoError, ValueError):
    pass


class DegenerateInputError(TopGeoError, ValueError):
    pass


class NumericError(TopGeoError, ArithmeticError):
    pass


class DataError(TopGeoError, ValueError):
    """Unreadable or missing input data."""
