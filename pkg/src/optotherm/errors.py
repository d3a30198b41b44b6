"""Exception hierarchy shared by the simulator and the CLI."""


class OptothermError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


class ConfigError(OptothermError, ValueError):
    exit_code = 2


class DegenerateParameterError(OptothermError, ValueError):
    exit_code = 2


class DomainError(OptothermError, ValueError):
    exit_code = 2


class IntegrationBlowupError(OptothermError, ArithmeticError):
    """Non-finite values appeared during integration."""

    exit_code = 3

    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t


class LevelCrossingError(OptothermError, ArithmeticError):
    """The shifted TLS frequency nu0 + delta became nonpositive with the bath on."""

    exit_code = 4

    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t


class StateCorruptionError(OptothermError, ValueError):
    exit_code = 3


class LedgerInconsistencyError(OptothermError, ArithmeticError):
    exit_code = 3
