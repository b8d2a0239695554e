"""
Concrete protocols on top of the two-phase template: KCVY, its simplified
variant without a preimage test, and KLVY compiled CHSH over mock encryption.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from qkit.core import mock_qhe, tcf
from qkit.core.protocol import (
    PROVER,
    Flag,
    Message,
    ProtocolId,
    VerifierRole,
    expect,
    expect_bit,
)
from qkit.core.rng import bits_from_wire, bits_to_wire, dot, random_bit, random_bits
from qkit.core.tcf import Claw, TcfFamily, TcfKey, TcfTrapdoor
from qkit.error_handler import (
    DomainError,
    IntegrityError,
    InvalidClawError,
    ProtocolViolationError,
    ValidationError,
)

logger = logging.getLogger(__name__)

REASON_NOT_IN_IMAGE = 'y_not_in_image'
REASON_PREIMAGE = 'preimage_mismatch'
REASON_INTEGRITY = 'ciphertext_integrity'

BRANCH_PREIMAGE = 'preimage'
BRANCH_EQUATION = 'equation'


def _sign(bit: int) -> int:
    return -1 if bit & 1 else 1


def kcvy_c_hat(r: int, x0: int, x1: int, d: int, m: int) -> int:
    """Correct ±1 answer of the KCVY equation test (the d column is don't-care when r·Δ = 0)."""
    delta = x0 ^ x1
    if delta == 0:
        raise InvalidClawError(f"Claw elements coincide: {x0}")
    if dot(r, delta) == 0:
        return _sign(dot(r, x0))
    return _sign(dot(d, delta) ^ m)


def simplified_c_hat(r0: int, r1: int, x0: int, x1: int, d: int, m: int) -> int:
    """(1-α)(-1)^{r0·x0} + α(-1)^β(-1)^m with α = r0·x0 ⊕ r1·x1, β = d·(x0⊕x1)."""
    delta = x0 ^ x1
    if delta == 0:
        raise InvalidClawError(f"Claw elements coincide: {x0}")
    alpha = dot(r0, x0) ^ dot(r1, x1)
    if alpha == 0:
        return _sign(dot(r0, x0))
    return _sign(dot(d, delta) ^ m)


def klvy_c_hat(a: int, x: int, m: int) -> int:
    return _sign(a ^ (x & m))


# -- wire helpers ------------------------------------------------------------

def key_message(key: TcfKey) -> Message:
    return {'type': 'key', 'key': key.to_dict()}


def parse_key(message: Message, sender: str) -> TcfKey:
    try:
        return TcfKey.from_dict(expect(message, 'key', sender, 'key')['key'])
    except ValidationError as e:
        raise ProtocolViolationError(sender, str(e)) from e


def parse_range_element(message: Message, sender: str) -> int:
    value = expect(message, 'y', sender, 'value')['value']
    if not isinstance(value, str) or not value.isdigit():
        raise ProtocolViolationError(sender, f"range element must be a decimal string, got {value!r}")
    return int(value)


def parse_bits(message: Message, name: str, n_bits: int, sender: str) -> int:
    try:
        return bits_from_wire(message.get(name), n_bits)
    except ValueError as e:
        raise ProtocolViolationError(sender, f"{name!r}: {e}") from e


class _TcfVerifier(VerifierRole):
    """Shared key → y opening of the two TCF-based protocols."""

    def __init__(self, family: Union[TcfFamily, str], security_param: int):
        super().__init__()
        self.family = TcfFamily(family)
        self.security_param = security_param
        self.key: Optional[TcfKey] = None
        self.trapdoor: Optional[TcfTrapdoor] = None
        self.claw: Optional[Claw] = None
        self.d: Optional[int] = None
        self._state = 'start'

    def _open(self, rng: np.random.Generator) -> Message:
        self.key, self.trapdoor = tcf.gen(self.security_param, self.family, rng)
        self._state = 'await_y'
        return key_message(self.key)

    def _receive_y(self, incoming: Message) -> bool:
        y = parse_range_element(incoming, PROVER)
        try:
            self.claw = tcf.invert(self.trapdoor, self.key, y)
        except DomainError:
            return False
        return True

    def rand_record(self) -> Dict[str, Any]:
        return {'trapdoor': self.trapdoor.to_dict() if self.trapdoor else None}

    def _violation(self, incoming: Message):
        raise ProtocolViolationError(PROVER, f"unexpected message in state {self._state!r}: {incoming!r}")


class KcvyVerifier(_TcfVerifier):
    protocol = ProtocolId.KCVY

    def __init__(self, family: Union[TcfFamily, str], security_param: int):
        super().__init__(family, security_param)
        self.branch: Optional[str] = None
        self.r: Optional[int] = None

    def step(self, incoming: Optional[Message], rng: np.random.Generator) -> Union[Message, Flag]:
        if self._state == 'start' and incoming is None:
            return self._open(rng)
        if self._state == 'await_y':
            if not self._receive_y(incoming):
                return self.reject(REASON_NOT_IN_IMAGE)
            if random_bit(rng) == 0:
                self.branch = BRANCH_PREIMAGE
                self._state = 'await_preimage'
                self.tags['branch'] = self.branch
                return {'type': 'branch', 'value': BRANCH_PREIMAGE}
            self.branch = BRANCH_EQUATION
            self.r = random_bits(rng, self.key.n_bits)
            self._state = 'await_d'
            self.tags['branch'] = self.branch
            return {'type': 'branch', 'value': BRANCH_EQUATION, 'r': bits_to_wire(self.r, self.key.n_bits)}
        if self._state == 'await_preimage':
            x = parse_bits(expect(incoming, 'preimage', PROVER, 'x'), 'x', self.key.n_bits, PROVER)
            self._state = 'done'
            if x in (self.claw.x0, self.claw.x1):
                return Flag.ACC
            return self.reject(REASON_PREIMAGE)
        if self._state == 'await_d':
            self.d = parse_bits(expect(incoming, 'd', PROVER, 'd'), 'd', self.key.n_bits, PROVER)
            self._state = 'phase_b'
            return Flag.CONT
        self._violation(incoming)

    def c_hat(self, m: int) -> int:
        return kcvy_c_hat(self.r, self.claw.x0, self.claw.x1, self.d, m)


class SimplifiedVerifier(_TcfVerifier):
    protocol = ProtocolId.SIMPLIFIED

    def __init__(self, family: Union[TcfFamily, str], security_param: int):
        super().__init__(family, security_param)
        self.r0: Optional[int] = None
        self.r1: Optional[int] = None

    def step(self, incoming: Optional[Message], rng: np.random.Generator) -> Union[Message, Flag]:
        if self._state == 'start' and incoming is None:
            return self._open(rng)
        if self._state == 'await_y':
            if not self._receive_y(incoming):
                return self.reject(REASON_NOT_IN_IMAGE)
            n = self.key.n_bits
            self.r0, self.r1 = random_bits(rng, n), random_bits(rng, n)
            self._state = 'await_d'
            return {'type': 'r', 'r0': bits_to_wire(self.r0, n), 'r1': bits_to_wire(self.r1, n)}
        if self._state == 'await_d':
            self.d = parse_bits(expect(incoming, 'd', PROVER, 'd'), 'd', self.key.n_bits, PROVER)
            self._state = 'phase_b'
            return Flag.CONT
        self._violation(incoming)

    def c_hat(self, m: int) -> int:
        return simplified_c_hat(self.r0, self.r1, self.claw.x0, self.claw.x1, self.d, m)


class KlvyChshVerifier(VerifierRole):
    protocol = ProtocolId.KLVY_CHSH

    def __init__(self):
        super().__init__()
        self.sk: Optional[mock_qhe.MockSecretKey] = None
        self.x: Optional[int] = None
        self.a: Optional[int] = None
        self._nonce: Optional[bytes] = None
        self._state = 'start'

    def step(self, incoming: Optional[Message], rng: np.random.Generator) -> Union[Message, Flag]:
        if self._state == 'start' and incoming is None:
            self.sk = mock_qhe.keygen(rng)
            self.x = random_bit(rng)
            ct = mock_qhe.enc(self.sk, self.x, rng)
            self._nonce = ct.nonce
            self._state = 'await_answer'
            return {'type': 'ciphertext', 'ct': ct.to_dict(), 'eval_key': self.sk.eval_key.hex()}
        if self._state == 'await_answer':
            raw = expect(incoming, 'ciphertext', PROVER, 'ct')['ct']
            self._state = 'phase_b'
            try:
                ct = mock_qhe.MockCiphertext.from_dict(raw)
                self.a = mock_qhe.dec(self.sk, ct, expected_nonce=self._nonce)
            except (IntegrityError, ValidationError):
                self._state = 'done'
                return self.reject(REASON_INTEGRITY)
            return Flag.CONT
        raise ProtocolViolationError(PROVER, f"unexpected message in state {self._state!r}")

    def c_hat(self, m: int) -> int:
        return klvy_c_hat(self.a, self.x, m)

    def rand_record(self) -> Dict[str, Any]:
        return {'sk': self.sk.master.hex() if self.sk else None, 'x': self.x}


def make_verifier(protocol: Union[ProtocolId, str], family: Union[TcfFamily, str] = TcfFamily.TOY,
                  security_param: int = 4) -> VerifierRole:
    protocol = ProtocolId(protocol)
    if protocol == ProtocolId.KCVY:
        return KcvyVerifier(family, security_param)
    if protocol == ProtocolId.SIMPLIFIED:
        return SimplifiedVerifier(family, security_param)
    return KlvyChshVerifier()


def recompute_c_hats(protocol: Union[ProtocolId, str], verifier_rand: Dict[str, Any],
                     messages: List[Tuple[str, Message]]) -> Optional[Tuple[int, int]]:
    """ĉ pair from the verifier's private record and a stored transcript; None without Phase B."""
    protocol = ProtocolId(protocol)
    by_type: Dict[str, Message] = {}
    for sender, payload in messages:
        by_type[f"{sender}:{payload.get('type')}"] = payload

    if protocol == ProtocolId.KLVY_CHSH:
        answer = by_type.get('prover:ciphertext')
        if answer is None:
            return None
        sk = mock_qhe.MockSecretKey(bytes.fromhex(verifier_rand['sk']))
        a = mock_qhe.dec(sk, mock_qhe.MockCiphertext.from_dict(answer['ct']))
        x = verifier_rand['x']
        return klvy_c_hat(a, x, 0), klvy_c_hat(a, x, 1)

    if 'prover:d' not in by_type:
        return None
    key = parse_key(by_type['verifier:key'], 'verifier')
    trapdoor = TcfTrapdoor.from_dict(verifier_rand['trapdoor'], key.family)
    claw = tcf.invert(trapdoor, key, parse_range_element(by_type['prover:y'], PROVER))
    n = key.n_bits
    d = parse_bits(by_type['prover:d'], 'd', n, PROVER)
    if protocol == ProtocolId.KCVY:
        r = parse_bits(by_type['verifier:branch'], 'r', n, 'verifier')
        return tuple(kcvy_c_hat(r, claw.x0, claw.x1, d, m) for m in (0, 1))
    rmsg = by_type['verifier:r']
    r0 = parse_bits(rmsg, 'r0', n, 'verifier')
    r1 = parse_bits(rmsg, 'r1', n, 'verifier')
    return tuple(simplified_c_hat(r0, r1, claw.x0, claw.x1, d, m) for m in (0, 1))
