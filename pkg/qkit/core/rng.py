"""Seeded counter-based random streams and bit-string helpers."""

import hashlib
from typing import Union

import numpy as np

ROLES = ('verifier', 'prover', 'harness')


def derive_stream(seed: int, trial: int = 0, role: str = 'verifier') -> np.random.Generator:
    """Philox stream keyed by BLAKE2b(seed, trial, role); streams never overlap across roles."""
    if role not in ROLES:
        raise ValueError(f"Unknown stream role {role!r}")
    digest = hashlib.blake2b(
        f"{int(seed)}:{int(trial)}:{role}".encode(), digest_size=16
    ).digest()
    key = int.from_bytes(digest, 'little')
    return np.random.Generator(np.random.Philox(key=key))


def random_bits(rng: np.random.Generator, n: int) -> int:
    """Uniform n-bit string as a Python int."""
    if n <= 0:
        return 0
    raw = int.from_bytes(rng.bytes((n + 7) // 8), 'little')
    return raw & ((1 << n) - 1)


def random_below(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrary-size bounds."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    width = (bound - 1).bit_length()
    while True:
        v = random_bits(rng, width)
        if v < bound:
            return v


def random_bit(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2))


def parity(v: int) -> int:
    return bin(v).count('1') & 1


def dot(a: int, b: int) -> int:
    """Inner product a·b mod 2 of two bit strings."""
    return parity(a & b)


def bits_to_wire(v: int, n_bits: int) -> dict:
    """Little-endian hex encoding with explicit width."""
    n_bytes = max(1, (n_bits + 7) // 8)
    return {'hex': int(v).to_bytes(n_bytes, 'little').hex(), 'n_bits': int(n_bits)}


def bits_from_wire(obj: Union[dict, None], n_bits: int = None) -> int:
    if not isinstance(obj, dict) or 'hex' not in obj or 'n_bits' not in obj:
        raise ValueError(f"Malformed bit string {obj!r}")
    width = obj['n_bits']
    if not isinstance(width, int) or width < 0:
        raise ValueError(f"Malformed bit-string width {width!r}")
    if n_bits is not None and width != n_bits:
        raise ValueError(f"Expected {n_bits}-bit string, got {width}")
    try:
        v = int.from_bytes(bytes.fromhex(obj['hex']), 'little')
    except (TypeError, ValueError) as e:
        raise ValueError(f"Malformed hex payload: {e}") from e
    if v >> width:
        raise ValueError("Bit string exceeds its declared width")
    return v
