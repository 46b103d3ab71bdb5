from typing import Dict, Any, Optional

# Codigos de salida del arnes de experimentos
EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_CONFIG = 2
EXIT_BLOW_UP = 3


class CouplingException(Exception):
    """
    Base exception for every failure raised by the library and the harness.

    Attributes:
        message: Human readable description of the error.
        details: Extra structured context (optional).
        exit_code: Process exit code the CLI uses when the error escapes.
    """

    exit_code: int = EXIT_CONFIG

    def __init__(
        self,
        message: str = "An unexpected error occurred",
        details: Optional[Dict[str, Any]] = None,
        exit_code: Optional[int] = None,
    ):
        self.message = message
        self.details = details or {}
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        """Converts the exception into a dict for JSON reports."""
        error_dict: Dict[str, Any] = {
            "error": type(self).__name__,
            "exit_code": self.exit_code,
            "message": self.message,
        }

        if self.details:
            error_dict["details"] = self.details

        return error_dict


class ConfigError(CouplingException):
    """Invalid configuration or parameters."""

    exit_code = EXIT_CONFIG


class DomainError(CouplingException):
    """A mathematical precondition of an operation does not hold."""

    exit_code = EXIT_CONFIG


class DensityOverflowError(DomainError):
    """The Girsanov log-density left the double-precision range."""


class BlowUpError(CouplingException):
    """Non-finite state encountered during time integration."""

    exit_code = EXIT_BLOW_UP

    def __init__(
        self,
        message: str,
        time: float,
        partial: Any = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.time = time
        self.partial = partial
        super().__init__(message, details={"time": time, **(details or {})})


class NotFoundError(CouplingException):
    """Requested ledger record does not exist."""


# Excepciones comunes predefinidas
def config_exception(
    message: str, details: Optional[Dict[str, Any]] = None
) -> ConfigError:
    """Creates an exception for invalid configuration values"""
    return ConfigError(message=message, details=details)


def domain_exception(
    message: str, details: Optional[Dict[str, Any]] = None
) -> DomainError:
    """Creates an exception for violated mathematical preconditions"""
    return DomainError(message=message, details=details)


def blow_up_exception(time: float, partial: Any = None) -> BlowUpError:
    """Creates an exception for a non-finite state at the given time"""
    return BlowUpError(message=f"blow-up at t={time:.6g}", time=time, partial=partial)


def not_found_exception(resource: str, id: Any) -> NotFoundError:
    """Creates an exception for missing records"""
    return NotFoundError(message=f"{resource} with id {id} not found")
