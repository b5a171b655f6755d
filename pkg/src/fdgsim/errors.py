"""Exception types shared across the simulator."""


class FdgError(Exception):
    """Base class for all simulator errors."""


class ConfigError(FdgError, ValueError):
    """Invalid configuration or hyperparameter."""


class ShapeError(FdgError, ValueError):
    """Array or parameter-vector dimensions do not agree."""


class DomainError(FdgError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ParseError(ConfigError):
    """Config file could not be parsed; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ClientError(FdgError):
    """Failure inside one client's local training, tagged with its id."""

    def __init__(self, client_id: int, cause: BaseException):
        self.client_id = client_id
        self.cause = cause
        super().__init__(f"client {client_id}: {cause}")
