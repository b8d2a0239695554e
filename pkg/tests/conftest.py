import pytest

from qkit.core import tcf
from qkit.core.rng import derive_stream


@pytest.fixture
def rng():
    return derive_stream(1234, 0, 'harness')


@pytest.fixture
def rabin21():
    # λ = 2 admits only the Blum primes 3 and 7
    return tcf.gen(2, tcf.TcfFamily.RABIN, derive_stream(0, 0, 'harness'))


@pytest.fixture
def toy3():
    return tcf.gen(3, tcf.TcfFamily.TOY, derive_stream(5, 0, 'harness'))


@pytest.fixture
def toy4():
    return tcf.gen(4, tcf.TcfFamily.TOY, derive_stream(6, 0, 'harness'))
