import pytest

from qkit.core import mock_qhe
from qkit.core.mock_qhe import MockCiphertext
from qkit.error_handler import IntegrityError, ValidationError


@pytest.fixture
def sk(rng):
    return mock_qhe.keygen(rng)


def test_encrypt_decrypt(sk, rng):
    assert mock_qhe.dec(sk, mock_qhe.enc(sk, 0, rng)) == 0
    assert mock_qhe.dec(sk, mock_qhe.enc(sk, 1, rng)) == 1


def test_fresh_nonces(sk, rng):
    a, b = mock_qhe.enc(sk, 0, rng), mock_qhe.enc(sk, 0, rng)
    assert a.nonce != b.nonce
    assert a.body != b.body


def test_only_bits_encrypt(sk, rng):
    with pytest.raises(ValidationError):
        mock_qhe.enc(sk, 2, rng)


def test_evaluate_tracks_depth(sk, rng):
    ct = mock_qhe.enc(sk, 1, rng)
    flipped = mock_qhe.evaluate(sk.eval_key, ct, lambda x: 1 - x)
    assert flipped.nonce == ct.nonce
    assert flipped.depth == 1
    assert mock_qhe.dec(sk, flipped) == 0
    twice = mock_qhe.evaluate(sk.eval_key, flipped, lambda x: x)
    assert twice.depth == 2 and mock_qhe.dec(sk, twice) == 0


def test_evaluate_rejects_non_bit_function(sk, rng):
    with pytest.raises(ValidationError):
        mock_qhe.evaluate(sk.eval_key, mock_qhe.enc(sk, 0, rng), lambda x: 5)


def test_nonce_mismatch(sk, rng):
    ct = mock_qhe.enc(sk, 1, rng)
    other = mock_qhe.enc(sk, 1, rng)
    with pytest.raises(IntegrityError):
        mock_qhe.dec(sk, ct, expected_nonce=other.nonce)
    assert mock_qhe.dec(sk, ct, expected_nonce=ct.nonce) == 1


def test_tampering_detected(sk, rng):
    ct = mock_qhe.enc(sk, 0, rng)
    body = bytes([ct.body[0] ^ 1]) + ct.body[1:]
    with pytest.raises(IntegrityError):
        mock_qhe.dec(sk, MockCiphertext(ct.nonce, body, ct.depth))
    with pytest.raises(IntegrityError):
        mock_qhe.dec(sk, MockCiphertext(ct.nonce, ct.body, ct.depth + 1))


def test_wrong_key(sk, rng):
    ct = mock_qhe.enc(sk, 1, rng)
    with pytest.raises(IntegrityError):
        mock_qhe.dec(mock_qhe.keygen(rng), ct)


def test_ciphertext_dict(sk, rng):
    ct = mock_qhe.enc(sk, 1, rng)
    assert MockCiphertext.from_dict(ct.to_dict()) == ct
    for bad in ({'nonce': 'ab', 'body': '', 'depth': 0},
                {'nonce': ct.nonce.hex(), 'body': 'zz', 'depth': 0},
                {'nonce': ct.nonce.hex(), 'body': '', 'depth': -1},
                {'body': ''}):
        with pytest.raises(ValidationError):
            MockCiphertext.from_dict(bad)


def test_evaluator_exposes_only_evaluation(sk, rng):
    evaluator = mock_qhe.Evaluator.from_hex(sk.eval_key.hex())
    ct = mock_qhe.enc(sk, 1, rng)
    assert mock_qhe.dec(sk, evaluator.evaluate(ct, lambda x: 1 - x)) == 0
    public = {name for name in dir(evaluator) if not name.startswith('_')}
    assert public == {'evaluate', 'from_hex'}
    assert sk.eval_key.hex() not in repr(evaluator)
    with pytest.raises(AttributeError):
        evaluator.key = sk.eval_key


def test_evaluator_rejects_bad_keys():
    for bad in ('zz', 'ab' * 8, 'ab' * 32):
        with pytest.raises(ValidationError):
            mock_qhe.Evaluator.from_hex(bad)
    with pytest.raises(ValidationError):
        mock_qhe.Evaluator('00' * 16)
