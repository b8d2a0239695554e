import pytest

from qkit.core.rng import (
    bits_from_wire,
    bits_to_wire,
    derive_stream,
    dot,
    parity,
    random_below,
    random_bits,
)


def test_streams_are_reproducible():
    a = derive_stream(7, 3, 'verifier')
    b = derive_stream(7, 3, 'verifier')
    assert [random_bits(a, 64) for _ in range(5)] == [random_bits(b, 64) for _ in range(5)]


def test_streams_differ_across_roles_and_trials():
    draws = {
        (trial, role): random_bits(derive_stream(7, trial, role), 64)
        for trial in range(3)
        for role in ('verifier', 'prover', 'harness')
    }
    assert len(set(draws.values())) == len(draws)


def test_unknown_role_rejected():
    with pytest.raises(ValueError):
        derive_stream(1, 0, 'observer')


def test_random_bits_width(rng):
    for n in (1, 3, 8, 13, 70):
        assert all(0 <= random_bits(rng, n) < 1 << n for _ in range(50))
    assert random_bits(rng, 0) == 0


def test_random_below_covers_range(rng):
    seen = {random_below(rng, 5) for _ in range(500)}
    assert seen == {0, 1, 2, 3, 4}
    with pytest.raises(ValueError):
        random_below(rng, 0)


def test_parity_and_dot():
    assert parity(0b1011) == 1
    assert parity(0b1001) == 0
    assert dot(0b110, 0b011) == 1
    assert dot(0b101, 0b010) == 0


def test_wire_encoding():
    wire = bits_to_wire(0b1011, 4)
    assert wire == {'hex': '0b', 'n_bits': 4}
    assert bits_from_wire(wire, 4) == 0b1011
    assert bits_to_wire(0x1ff, 9)['hex'] == 'ff01'


@pytest.mark.parametrize('payload', [
    None,
    {'hex': '0b'},
    {'hex': 'zz', 'n_bits': 4},
    {'hex': 'ff', 'n_bits': 4},
    {'hex': '01', 'n_bits': -1},
])
def test_malformed_wire_rejected(payload):
    with pytest.raises(ValueError):
        bits_from_wire(payload)


def test_wire_width_mismatch():
    with pytest.raises(ValueError):
        bits_from_wire(bits_to_wire(3, 4), 5)
