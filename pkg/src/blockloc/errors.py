"""Exception hierarchy shared across the library and the CLI exit-code map."""


class BlocklocError(Exception):
    """Base class for all library errors."""


class ConfigError(BlocklocError):
    """Invalid configuration, bad arguments, or precondition violations (CLI exit 1)."""


class NumericalError(BlocklocError):
    """A numerical routine failed to converge or produced non-finite values (CLI exit 2)."""


class PropertyViolation(BlocklocError):
    """A checked mathematical property failed where it must hold (CLI exit 3)."""
