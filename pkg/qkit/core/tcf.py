"""
Trapdoor claw-free function families.

Two families are provided: Rabin modular squaring over a Blum integer and an
exhaustively enumerable toy family built from XOR pairing. Both expose the same
four operations (gen, evaluate, invert, preimage_type) and round-trip through
JSON dictionaries.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from qkit.config import LIMITS
from qkit.core.rng import random_below, random_bits
from qkit.error_handler import (
    CapacityError,
    DomainError,
    GenerationError,
    NoPreimageError,
    ValidationError,
)

logger = logging.getLogger(__name__)

TOY_MAX_BITS = 20
_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class TcfFamily(Enum):
    RABIN = "rabin"
    TOY = "toy"


@dataclass(frozen=True)
class TcfKey:
    """Public key. Rabin carries the modulus, toy the full function table."""
    family: TcfFamily
    n_bits: int
    modulus: Optional[int] = None
    table: Optional[Tuple[int, ...]] = None

    def to_dict(self) -> Dict:
        if self.family == TcfFamily.RABIN:
            return {'family': 'rabin', 'n_bits': self.n_bits, 'modulus': str(self.modulus)}
        return {'family': 'toy', 'n_bits': self.n_bits, 'table': list(self.table)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'TcfKey':
        try:
            family = TcfFamily(data['family'])
            n_bits = int(data['n_bits'])
            if family == TcfFamily.RABIN:
                modulus = int(data['modulus'])
                if modulus < 15 or modulus.bit_length() - 1 != n_bits:
                    raise ValueError("modulus does not match n_bits")
                return cls(family, n_bits, modulus=modulus)
            table = tuple(int(v) for v in data['table'])
            if len(table) != 1 << n_bits:
                raise ValueError("table length does not match n_bits")
            return cls(family, n_bits, table=table)
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed TCF key: {e}") from e


@dataclass(frozen=True)
class TcfTrapdoor:
    """Secret data. Rabin: the factors (p, q). Toy: inverse table y -> x0."""
    family: TcfFamily
    p: Optional[int] = None
    q: Optional[int] = None
    inverse: Optional[Tuple[int, ...]] = None

    def to_dict(self) -> Dict:
        if self.family == TcfFamily.RABIN:
            return {'p': str(self.p), 'q': str(self.q)}
        return {'inverse': list(self.inverse)}

    @classmethod
    def from_dict(cls, data: Dict, family: TcfFamily) -> 'TcfTrapdoor':
        try:
            if family == TcfFamily.RABIN:
                return cls(family, p=int(data['p']), q=int(data['q']))
            return cls(family, inverse=tuple(int(v) for v in data['inverse']))
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed TCF trapdoor: {e}") from e


@dataclass(frozen=True)
class Claw:
    x0: int
    x1: int
    y: int

    @property
    def delta(self) -> int:
        return self.x0 ^ self.x1


# -- number theory -----------------------------------------------------------

def jacobi(n: int, m: int) -> int:
    """Jacobi symbol (n | m) for odd positive m."""
    if m <= 0 or not m & 1:
        raise ValueError("Jacobi symbol needs an odd positive modulus")
    acc = 1
    while True:
        n %= m
        if n == 0:
            return 0
        while not n & 1:
            n >>= 1
            if m & 7 not in (1, 7):
                acc = -acc
        if n == 1:
            return acc
        if n & 3 == 3 and m & 3 == 3:
            acc = -acc
        n, m = m, n


def is_probable_prime(n: int, rng: Optional[np.random.Generator] = None, rounds: int = 16) -> bool:
    """Miller-Rabin; deterministic below 3.3e24, randomized bases above."""
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n % sp == 0:
            return n == sp
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1

    bases: List[int] = list(_SMALL_PRIMES)
    if n.bit_length() > 81 and rng is not None:
        bases += [2 + random_below(rng, n - 3) for _ in range(rounds)]

    for a in bases:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _crt(rp: int, p: int, rq: int, q: int) -> int:
    return (rp * q * pow(q, -1, p) + rq * p * pow(p, -1, q)) % (p * q)


@lru_cache(maxsize=64)
def _factor_blum(modulus: int) -> Tuple[int, int]:
    """Pollard rho; the honest-prover simulator uses it in place of a quantum claw state."""
    if modulus % 2 == 0:
        return 2, modulus // 2
    budget = 1 << 22
    for c in range(1, 64):
        x = y = 2
        d = 1
        steps = 0
        while d == 1 and steps < budget:
            x = (x * x + c) % modulus
            y = (y * y + c) % modulus
            y = (y * y + c) % modulus
            d = math.gcd(abs(x - y), modulus)
            steps += 1
        if 1 < d < modulus:
            return min(d, modulus // d), max(d, modulus // d)
    raise CapacityError(f"Cannot simulate a claw state for a {modulus.bit_length()}-bit modulus")


# -- generation --------------------------------------------------------------

def _blum_primes_in(lo: int, hi: int) -> List[int]:
    return [c for c in range(lo | 3, hi, 4) if c % 4 == 3 and is_probable_prime(c)]


def _sample_blum_prime(rng: np.random.Generator, lo: int, hi: int, exclude: int = 0) -> int:
    for _ in range(64 * (hi - lo).bit_length() + 256):
        c = lo + random_below(rng, hi - lo)
        c |= 3
        if lo <= c < hi and c != exclude and is_probable_prime(c, rng):
            return c
    raise GenerationError(f"No Blum prime found in [{lo}, {hi})")


def _gen_rabin(security_param: int, rng: np.random.Generator) -> Tuple[TcfKey, TcfTrapdoor]:
    # primes are drawn from [2^(λ-1), 2^(λ+1)) so that λ=2 still admits the pair {3, 7}
    lo, hi = 1 << (security_param - 1), 1 << (security_param + 1)
    if 2 * (security_param + 1) > LIMITS['rabin_max_bits']:
        raise GenerationError(f"Modulus would exceed {LIMITS['rabin_max_bits']} bits")

    if hi - lo <= 1 << 16:
        candidates = _blum_primes_in(lo, hi)
        if len(candidates) < 2:
            raise GenerationError(f"Fewer than two Blum primes for λ={security_param}")
        i, j = rng.choice(len(candidates), size=2, replace=False)
        p, q = candidates[int(i)], candidates[int(j)]
    else:
        p = _sample_blum_prime(rng, lo, hi)
        q = _sample_blum_prime(rng, lo, hi, exclude=p)

    p, q = min(p, q), max(p, q)
    modulus = p * q
    key = TcfKey(TcfFamily.RABIN, modulus.bit_length() - 1, modulus=modulus)
    logger.debug(f"Generated Rabin key with {modulus.bit_length()}-bit modulus")
    return key, TcfTrapdoor(TcfFamily.RABIN, p=p, q=q)


def _gen_toy(n_bits: int, rng: np.random.Generator) -> Tuple[TcfKey, TcfTrapdoor]:
    if n_bits > TOY_MAX_BITS:
        raise GenerationError(f"Toy tables are limited to {TOY_MAX_BITS} bits")
    half = 1 << (n_bits - 1)
    shift = half | random_bits(rng, n_bits - 1)
    labels = rng.permutation(half)

    table = [0] * (1 << n_bits)
    inverse = [0] * half
    for x0 in range(half):
        label = int(labels[x0])
        table[x0] = label
        table[x0 ^ shift] = label
        inverse[label] = x0
    return TcfKey(TcfFamily.TOY, n_bits, table=tuple(table)), TcfTrapdoor(TcfFamily.TOY, inverse=tuple(inverse))


def gen(security_param: int, family: TcfFamily, rng: np.random.Generator) -> Tuple[TcfKey, TcfTrapdoor]:
    """Generate a key/trapdoor pair, deterministic given the rng stream."""
    family = TcfFamily(family)
    if security_param < 2:
        raise GenerationError(f"Security parameter must be at least 2, got {security_param}")
    if family == TcfFamily.RABIN:
        return _gen_rabin(security_param, rng)
    return _gen_toy(security_param, rng)


# -- evaluation --------------------------------------------------------------

def in_domain(key: TcfKey, x: int) -> bool:
    if key.family == TcfFamily.RABIN:
        return 1 <= x and 2 * x < key.modulus and math.gcd(x, key.modulus) == 1
    return 0 <= x < 1 << key.n_bits


def _check_domain(key: TcfKey, x: int):
    if not isinstance(x, int) or not in_domain(key, x):
        raise DomainError(f"{x!r} is outside the {key.family.value} domain")


def evaluate(key: TcfKey, x: int) -> int:
    """f_k(x)."""
    _check_domain(key, x)
    if key.family == TcfFamily.RABIN:
        return pow(x, 2, key.modulus)
    return key.table[x]


def preimage_type(key: TcfKey, x: int) -> int:
    """Publicly computable bit splitting every claw.

    Rabin uses the Jacobi symbol: the two domain roots of a square always
    carry opposite symbols when p ≡ q ≡ 3 (mod 4), and type 0 is (x | N) = -1.
    Toy uses the top bit.
    """
    _check_domain(key, x)
    if key.family == TcfFamily.RABIN:
        return 0 if jacobi(x, key.modulus) == -1 else 1
    return x >> (key.n_bits - 1)


def _order(key: TcfKey, a: int, b: int, y: int) -> Claw:
    if preimage_type(key, a) == 0:
        return Claw(a, b, y)
    return Claw(b, a, y)


def invert(trapdoor: TcfTrapdoor, key: TcfKey, y: int) -> Claw:
    """Trapdoor inversion of y into its claw (x0, x1)."""
    if key.family == TcfFamily.RABIN:
        p, q, modulus = trapdoor.p, trapdoor.q, key.modulus
        if not isinstance(y, int) or not 0 < y < modulus or math.gcd(y, modulus) != 1:
            raise NoPreimageError(f"{y!r} has no preimage")
        rp = pow(y, (p + 1) // 4, p)
        rq = pow(y, (q + 1) // 4, q)
        if rp * rp % p != y % p or rq * rq % q != y % q:
            raise NoPreimageError(f"{y} is not a quadratic residue mod N")
        roots = {_crt(sp, p, sq, q) for sp in (rp, p - rp) for sq in (rq, q - rq)}
        low = sorted(r for r in roots if 2 * r < modulus)
        return _order(key, low[0], low[1], y)

    half = 1 << (key.n_bits - 1)
    if not isinstance(y, int) or not 0 <= y < half:
        raise NoPreimageError(f"{y!r} is outside the toy range")
    x0 = trapdoor.inverse[y]
    x1 = next(x for x in range(half, 1 << key.n_bits) if key.table[x] == y)
    return _order(key, x0, x1, y)


def is_claw(key: TcfKey, x0: int, x1: int) -> bool:
    """x0 ≠ x1 in the domain with f(x0) = f(x1)."""
    if x0 == x1 or not in_domain(key, x0) or not in_domain(key, x1):
        return False
    return evaluate(key, x0) == evaluate(key, x1)


def partner(key: TcfKey, x: int) -> int:
    """Other preimage of f(x) without the trapdoor (simulation only)."""
    _check_domain(key, x)
    if key.family == TcfFamily.TOY:
        y = key.table[x]
        return next(z for z, v in enumerate(key.table) if v == y and z != x)
    p, q = _factor_blum(key.modulus)
    other = _crt(x % p, p, (-x) % q, q)
    return other if 2 * other < key.modulus else key.modulus - other


def sample_domain(key: TcfKey, rng: np.random.Generator) -> int:
    if key.family == TcfFamily.TOY:
        return random_bits(rng, key.n_bits)
    while True:
        x = 1 + random_below(rng, (key.modulus - 1) // 2)
        if math.gcd(x, key.modulus) == 1:
            return x


def sample_claw(key: TcfKey, rng: np.random.Generator) -> Claw:
    """Claw with uniform image, as obtained by measuring the image register of Σ_x |x⟩|f(x)⟩."""
    x = sample_domain(key, rng)
    return _order(key, x, partner(key, x), evaluate(key, x))


def domain_elements(key: TcfKey) -> List[int]:
    """Enumerate the domain; only feasible for small keys."""
    if key.family == TcfFamily.TOY:
        return list(range(1 << key.n_bits))
    if key.modulus.bit_length() > 24:
        raise CapacityError("Domain too large to enumerate")
    return [x for x in range(1, (key.modulus + 1) // 2) if in_domain(key, x)]
