"""Exception hierarchy shared by all subcommands.

Each class carries an ``exit_code`` so the CLI can map failures onto
distinct process exit statuses.
"""


class CrossMAEError(Exception):
    exit_code = 1


class ConfigError(CrossMAEError, ValueError):
    exit_code = 4


class InputError(CrossMAEError, ValueError):
    exit_code = 5


class DimensionMismatchError(InputError):
    pass


class FeatureAvailabilityError(InputError):
    pass


class MissingInputError(CrossMAEError, FileNotFoundError):
    exit_code = 3


class NumericError(CrossMAEError, ArithmeticError):
    exit_code = 6


class DegenerateBatchError(NumericError):
    pass
