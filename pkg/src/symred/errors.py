"""Exception types shared by all modules.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``AmbiguityError`` -> 3.
"""


class SymredError(Exception):
    pass


class DimensionError(SymredError, ValueError):
    pass


class AmbiguityError(SymredError):
    """A numerical decision (rank, support, stabilizer) fell inside a tolerance band."""


class PreconditionError(SymredError, ValueError):
    pass


class NotExpressibleError(SymredError):
    """An invariant could not be written through the current generator set."""


class ConfigError(SymredError):
    pass
