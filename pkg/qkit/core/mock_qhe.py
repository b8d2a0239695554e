"""
Mock homomorphic encryption of single bits.

Ciphertexts are AES-GCM sealed under an evaluation key derived from the
secret key, with the 128-bit nonce and evaluation depth bound as associated
data. The evaluation key travels to the prover, so the scheme is transparent.
Provers hold it only inside an `Evaluator`, whose single operation is
homomorphic evaluation; the function passed in stands for the circuit run
under encryption. It models
completeness of a homomorphic scheme, not its semantic security.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from qkit.error_handler import IntegrityError, ValidationError

logger = logging.getLogger(__name__)

NONCE_BYTES = 16
KEY_BYTES = 16


@dataclass(frozen=True)
class MockSecretKey:
    master: bytes

    @property
    def eval_key(self) -> bytes:
        return derive_eval_key(self.master)


@dataclass(frozen=True)
class MockCiphertext:
    nonce: bytes
    body: bytes
    depth: int = 0

    def to_dict(self) -> Dict:
        return {'nonce': self.nonce.hex(), 'body': self.body.hex(), 'depth': self.depth}

    @classmethod
    def from_dict(cls, data: Dict) -> 'MockCiphertext':
        try:
            nonce = bytes.fromhex(data['nonce'])
            body = bytes.fromhex(data['body'])
            depth = data['depth']
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed ciphertext: {e}") from e
        if len(nonce) != NONCE_BYTES or not isinstance(depth, int) or depth < 0:
            raise ValidationError("Malformed ciphertext header")
        return cls(nonce, body, depth)


def derive_eval_key(master: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=KEY_BYTES,
        salt=None,
        info=b'qkit-mock-qhe-eval',
    ).derive(master)


def keygen(rng: np.random.Generator) -> MockSecretKey:
    return MockSecretKey(rng.bytes(KEY_BYTES))


def _aad(nonce: bytes, depth: int) -> bytes:
    return nonce + depth.to_bytes(4, 'big')


def _gcm_nonce(nonce: bytes, depth: int) -> bytes:
    return hashlib.blake2b(_aad(nonce, depth), digest_size=12).digest()


def _seal(eval_key: bytes, nonce: bytes, depth: int, bit: int) -> MockCiphertext:
    body = AESGCM(eval_key).encrypt(_gcm_nonce(nonce, depth), bytes([bit]), _aad(nonce, depth))
    return MockCiphertext(nonce, body, depth)


def _open(eval_key: bytes, ct: MockCiphertext) -> int:
    try:
        plain = AESGCM(eval_key).decrypt(_gcm_nonce(ct.nonce, ct.depth), ct.body, _aad(ct.nonce, ct.depth))
    except InvalidTag as e:
        raise IntegrityError("Ciphertext failed authentication") from e
    if len(plain) != 1 or plain[0] not in (0, 1):
        raise IntegrityError("Ciphertext payload is not a bit")
    return plain[0]


def enc(sk: MockSecretKey, x: int, rng: np.random.Generator) -> MockCiphertext:
    """Encrypt bit x under a fresh 128-bit nonce."""
    if x not in (0, 1):
        raise ValidationError(f"Only bits can be encrypted, got {x!r}")
    return _seal(sk.eval_key, rng.bytes(NONCE_BYTES), 0, int(x))


def dec(sk: MockSecretKey, ct: MockCiphertext, expected_nonce: bytes = None) -> int:
    """Decrypt; a nonce other than the one issued for this execution is an integrity failure."""
    if expected_nonce is not None and ct.nonce != expected_nonce:
        raise IntegrityError("Ciphertext nonce does not match this execution")
    return _open(sk.eval_key, ct)


def evaluate(eval_key: bytes, ct: MockCiphertext, fn: Callable[[int], int]) -> MockCiphertext:
    """Homomorphically apply a bit function, producing Enc(fn(x)) at depth+1."""
    out = fn(_open(eval_key, ct))
    if out not in (0, 1):
        raise ValidationError(f"Evaluated function returned {out!r}")
    return _seal(eval_key, ct.nonce, ct.depth + 1, int(out))


class Evaluator:
    """Evaluate-only handle on an evaluation key received over the wire."""
    __slots__ = ('_eval_key',)

    def __init__(self, eval_key: bytes):
        if not isinstance(eval_key, bytes) or len(eval_key) != KEY_BYTES:
            raise ValidationError(f"Evaluation key must be {KEY_BYTES} bytes")
        self._eval_key = eval_key

    @classmethod
    def from_hex(cls, text: str) -> 'Evaluator':
        try:
            raw = bytes.fromhex(text)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"Malformed evaluation key: {e}") from e
        return cls(raw)

    def evaluate(self, ct: MockCiphertext, fn: Callable[[int], int]) -> MockCiphertext:
        return evaluate(self._eval_key, ct, fn)

    def __repr__(self) -> str:
        return 'Evaluator(<hidden>)'
