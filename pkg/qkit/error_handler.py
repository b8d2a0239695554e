import logging
import traceback
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from functools import wraps
from typing import Any, Callable, Dict, List, Optional

from qkit.config import EXIT_CODES


class ErrorSeverity(Enum):
    """Severity levels for errors"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorType(Enum):
    """Types of errors that can occur"""
    VALIDATION = "validation"
    DOMAIN = "domain"
    GENERATION = "generation"
    PROTOCOL = "protocol"
    INTEGRITY = "integrity"
    CAPACITY = "capacity"
    IO = "io"
    UNKNOWN = "unknown"


class QkitError(Exception):
    """Base class for every error raised by the toolkit."""
    error_type = ErrorType.UNKNOWN


class ValidationError(QkitError, ValueError):
    error_type = ErrorType.VALIDATION


class DomainError(QkitError, ValueError):
    """Input lies outside the function domain."""
    error_type = ErrorType.DOMAIN


class NoPreimageError(DomainError):
    """Range element has no preimage under the keyed function."""


class InvalidClawError(ValidationError):
    pass


class OracleError(ValidationError):
    """A type oracle returned something other than a bit."""


class NormalizationError(ValidationError):
    pass


class GenerationError(QkitError):
    error_type = ErrorType.GENERATION


class CapacityError(QkitError):
    """Dense simulation or enumeration budget exceeded."""
    error_type = ErrorType.CAPACITY


class BudgetExceededError(CapacityError):
    pass


class IntegrityError(QkitError):
    error_type = ErrorType.INTEGRITY


class ProtocolViolationError(QkitError):
    """Malformed or out-of-order message, attributed to its sender."""
    error_type = ErrorType.PROTOCOL

    def __init__(self, sender: str, message: str):
        super().__init__(f"{sender}: {message}")
        self.sender = sender
        self.detail = message
        self.transcript = None


class TransportError(QkitError, OSError):
    error_type = ErrorType.IO


@dataclass
class ErrorContext:
    """Context information for an error"""
    error_type: ErrorType
    severity: ErrorSeverity
    message: str
    timestamp: datetime
    stack_trace: str
    metadata: Dict[str, Any] = field(default_factory=dict)


_EXIT_BY_TYPE = {
    ErrorType.VALIDATION: EXIT_CODES['validation'],
    ErrorType.DOMAIN: EXIT_CODES['validation'],
    ErrorType.GENERATION: EXIT_CODES['validation'],
    ErrorType.CAPACITY: EXIT_CODES['validation'],
    ErrorType.PROTOCOL: EXIT_CODES['protocol_violation'],
    ErrorType.INTEGRITY: EXIT_CODES['protocol_violation'],
    ErrorType.IO: EXIT_CODES['io'],
}


class ErrorHandler:
    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.error_history: List[ErrorContext] = []

    def categorize(self, error: Exception) -> ErrorType:
        """Map an exception onto an ErrorType."""
        if isinstance(error, QkitError):
            return error.error_type
        if isinstance(error, (OSError, TimeoutError)):
            return ErrorType.IO
        if isinstance(error, (ValueError, TypeError, KeyError)):
            return ErrorType.VALIDATION
        return ErrorType.UNKNOWN

    def _determine_severity(self, error_type: ErrorType) -> ErrorSeverity:
        """Determine the severity of an error"""
        if error_type in (ErrorType.PROTOCOL, ErrorType.INTEGRITY, ErrorType.IO):
            return ErrorSeverity.HIGH
        if error_type in (ErrorType.VALIDATION, ErrorType.DOMAIN, ErrorType.CAPACITY):
            return ErrorSeverity.MEDIUM
        if error_type == ErrorType.GENERATION:
            return ErrorSeverity.LOW
        return ErrorSeverity.CRITICAL

    def handle_error(self, error: Exception, metadata: Optional[Dict] = None) -> int:
        """Record and log an error, returning the process exit code for it."""
        error_type = self.categorize(error)
        context = ErrorContext(
            error_type=error_type,
            severity=self._determine_severity(error_type),
            message=str(error),
            timestamp=datetime.now(),
            stack_trace=traceback.format_exc(),
            metadata=metadata or {},
        )
        if isinstance(error, ProtocolViolationError):
            context.metadata.setdefault('sender', error.sender)
        self._log_error(context)
        self.error_history.append(context)
        return self.exit_code(error_type)

    def exit_code(self, error_type: ErrorType) -> int:
        return _EXIT_BY_TYPE.get(error_type, 1)

    def _log_error(self, context: ErrorContext):
        """Log error with appropriate severity"""
        log_message = f"{context.error_type.value} error: {context.message}"
        extra = {'qkit_' + k: v for k, v in context.metadata.items()}

        if context.severity == ErrorSeverity.CRITICAL:
            self.logger.critical(log_message, extra=extra)
            self.logger.debug(context.stack_trace)
        elif context.severity == ErrorSeverity.HIGH:
            self.logger.error(log_message, extra=extra)
        elif context.severity == ErrorSeverity.MEDIUM:
            self.logger.warning(log_message, extra=extra)
        else:
            self.logger.info(log_message, extra=extra)

    def get_error_history(self, time_window: Optional[timedelta] = None) -> List[Dict]:
        """Get error history with optional time window"""
        cutoff = datetime.now() - time_window if time_window else None
        return [
            self._format_error_context(context)
            for context in self.error_history
            if cutoff is None or context.timestamp >= cutoff
        ]

    def _format_error_context(self, context: ErrorContext) -> Dict:
        return {
            'error_type': context.error_type.value,
            'severity': context.severity.value,
            'message': context.message,
            'timestamp': context.timestamp.isoformat(),
            'metadata': context.metadata,
        }

    def clear_error_history(self):
        self.error_history = []


def handle_cli_errors(func: Callable[..., int]) -> Callable[..., int]:
    """Decorator turning toolkit errors into CLI exit codes."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        handler = ErrorHandler()
        try:
            return func(*args, **kwargs)
        except Exception as e:
            return handler.handle_error(e, {'command': func.__name__})
    return wrapper
