"""Exception types.

Every error carries a stable ``exit_code`` so the CLI can map failures to
distinct process exit statuses.
"""


class LBRWError(Exception):
    exit_code = 1


# kernels / parameters

class KernelError(LBRWError, ValueError):
    exit_code = 10


class EmptyKernel(KernelError):
    pass


class AsymmetricKernel(KernelError):
    pass


class NotStochastic(KernelError):
    pass


class Periodic(KernelError):
    pass


class Reducible(KernelError):
    pass


class ParameterError(LBRWError, ValueError):
    exit_code = 11


class NonpositiveGrowth(ParameterError):
    pass


class DomainError(LBRWError, ValueError):
    exit_code = 12


# forward engine

class IntensityOverflow(LBRWError, OverflowError):
    exit_code = 20


class MemoryBudgetExceeded(LBRWError, MemoryError):
    exit_code = 21


class RecordFormatError(LBRWError, ValueError):
    exit_code = 22


class PersistentExtinction(LBRWError):
    exit_code = 23


# lineage tracer

class NoAncestorMass(LBRWError):
    exit_code = 30


class OccupancyViolation(LBRWError, ValueError):
    exit_code = 31


class WindowExhausted(LBRWError):
    exit_code = 32


# experiments / analytics

class InfeasibleGeometry(LBRWError, ValueError):
    exit_code = 40


class NonConvergence(LBRWError):
    exit_code = 41

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class BudgetExceeded(LBRWError):
    exit_code = 42


class MissingDecomposition(LBRWError, ValueError):
    exit_code = 43


# configuration

class ConfigError(LBRWError, ValueError):
    exit_code = 2


class ParseError(ConfigError):
    exit_code = 6

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}, column {column or 1})"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class UnknownKey(ConfigError):
    exit_code = 7


class RangeError(ConfigError):
    exit_code = 8


class SelftestFailure(LBRWError):
    exit_code = 3
