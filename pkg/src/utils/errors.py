"""Error types and their CLI exit codes."""


class FtrsecError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DomainError(FtrsecError, ValueError):
    """An argument lies outside the domain of a function or model."""

    exit_code = 2


class ConfigError(FtrsecError):
    """Scenario or runtime configuration is invalid."""

    exit_code = 2

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class NumericsError(FtrsecError):
    """A series or quadrature failed to reach its accuracy target."""

    exit_code = 3


class ValidationFailure(FtrsecError):
    """A closed form disagrees with an oracle, or the validation gate failed."""

    exit_code = 4
