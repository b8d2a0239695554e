from fractions import Fraction

import pytest

from qkit.error_handler import BudgetExceededError, ValidationError
from qkit.harness import certify


@pytest.mark.parametrize('protocol', ['simplified', 'kcvy', 'klvy_chsh'])
def test_ideal_ceiling_is_three_quarters(protocol):
    result = certify.certify_classical_ceiling(protocol, 2, 'ideal')
    assert result.max_success == Fraction(3, 4)
    assert not result.parity_leaked
    assert result.rows_checked == 4 * result.views


@pytest.mark.parametrize('protocol', ['simplified', 'kcvy', 'klvy_chsh'])
def test_leaked_ceiling_is_one(protocol):
    result = certify.certify_classical_ceiling(protocol, 2, 'leaked')
    assert result.max_success == 1
    assert result.parity_leaked
    assert result.to_dict()['max_success_exact'] == '1/1'


def test_three_bit_simplified():
    assert certify.certify_classical_ceiling('simplified', 3).max_success == Fraction(3, 4)


def test_budget_and_validation():
    with pytest.raises(BudgetExceededError):
        certify.certify_classical_ceiling('simplified', 4)
    with pytest.raises(BudgetExceededError):
        certify.certify_classical_ceiling('kcvy', 1)
    with pytest.raises(ValidationError):
        certify.certify_classical_ceiling('simplified', 2, 'peek')
    with pytest.raises(ValueError):
        certify.certify_classical_ceiling('bb84', 2)


def test_equation_pair():
    assert certify.equation_pair(0, 1, 0) == (-1, -1)
    assert certify.equation_pair(0, 0, 1) == (1, 1)
    assert certify.equation_pair(1, 0, 1) == (-1, 1)
