from datetime import timedelta

import pytest

from qkit.config import EXIT_CODES
from qkit.error_handler import (
    BudgetExceededError,
    CapacityError,
    DomainError,
    ErrorHandler,
    ErrorSeverity,
    ErrorType,
    GenerationError,
    IntegrityError,
    NoPreimageError,
    NormalizationError,
    ProtocolViolationError,
    TransportError,
    ValidationError,
    handle_cli_errors,
)


@pytest.mark.parametrize('error, error_type, code', [
    (ValidationError('bad'), ErrorType.VALIDATION, EXIT_CODES['validation']),
    (NormalizationError('norm'), ErrorType.VALIDATION, EXIT_CODES['validation']),
    (NoPreimageError('y'), ErrorType.DOMAIN, EXIT_CODES['validation']),
    (GenerationError('primes'), ErrorType.GENERATION, EXIT_CODES['validation']),
    (BudgetExceededError('big'), ErrorType.CAPACITY, EXIT_CODES['validation']),
    (ProtocolViolationError('prover', 'junk'), ErrorType.PROTOCOL, EXIT_CODES['protocol_violation']),
    (IntegrityError('tag'), ErrorType.INTEGRITY, EXIT_CODES['protocol_violation']),
    (TransportError('refused'), ErrorType.IO, EXIT_CODES['io']),
    (FileNotFoundError('x.json'), ErrorType.IO, EXIT_CODES['io']),
    (KeyError('k'), ErrorType.VALIDATION, EXIT_CODES['validation']),
    (RuntimeError('boom'), ErrorType.UNKNOWN, 1),
])
def test_categorize_and_exit_code(error, error_type, code):
    handler = ErrorHandler()
    assert handler.categorize(error) == error_type
    assert handler.handle_error(error) == code


def test_hierarchy():
    assert issubclass(NoPreimageError, DomainError)
    assert issubclass(DomainError, ValueError)
    assert issubclass(BudgetExceededError, CapacityError)
    assert issubclass(TransportError, OSError)


def test_violation_carries_sender():
    error = ProtocolViolationError('verifier', 'round limit')
    assert error.sender == 'verifier'
    assert error.detail == 'round limit'
    assert error.transcript is None
    assert str(error) == 'verifier: round limit'


def test_history_and_severity():
    handler = ErrorHandler()
    handler.handle_error(ProtocolViolationError('prover', 'junk'), {'trial': 3})
    handler.handle_error(GenerationError('no primes'))
    history = handler.get_error_history()
    assert [h['severity'] for h in history] == [ErrorSeverity.HIGH.value, ErrorSeverity.LOW.value]
    assert history[0]['metadata'] == {'trial': 3, 'sender': 'prover'}
    assert len(handler.get_error_history(timedelta(hours=1))) == 2
    handler.clear_error_history()
    assert handler.get_error_history() == []


def test_handle_cli_errors():
    @handle_cli_errors
    def fails():
        raise ValidationError('nope')

    @handle_cli_errors
    def works():
        return 0

    assert fails() == EXIT_CODES['validation']
    assert works() == 0
