"""
Provers: the honest quantum prover over the sparse simulator, an optimal
classical prover, matrix-specified Phase-B devices and the parity adversary.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, validator

from qkit.config import HONEST_ANGLES, LIMITS
from qkit.core import mock_qhe, qsim, tcf
from qkit.core.protocol import (
    VERIFIER,
    Message,
    ProtocolId,
    ProverRole,
    expect,
    expect_bit,
)
from qkit.core.protocol_suite import BRANCH_EQUATION, BRANCH_PREIMAGE, parse_bits, parse_key
from qkit.core.rng import bits_to_wire, dot
from qkit.core.tcf import TcfKey
from qkit.error_handler import ProtocolViolationError, ValidationError

logger = logging.getLogger(__name__)

_EPR = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
# Alice's measurement basis per input bit: x=0 is Z, x=1 is X
_ALICE_BASES = {
    0: (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    1: (np.array([1, 1], dtype=complex) / math.sqrt(2), np.array([1, -1], dtype=complex) / math.sqrt(2)),
}


def _ciphertext(message: Message) -> Tuple[mock_qhe.Evaluator, mock_qhe.MockCiphertext]:
    expect(message, 'ciphertext', VERIFIER, 'ct', 'eval_key')
    try:
        return mock_qhe.Evaluator.from_hex(message['eval_key']), mock_qhe.MockCiphertext.from_dict(message['ct'])
    except (TypeError, ValueError) as e:
        raise ProtocolViolationError(VERIFIER, f"malformed ciphertext: {e}") from e


class _DispatchProver(ProverRole):
    def __init__(self, protocol: Union[ProtocolId, str], rng: np.random.Generator):
        self.protocol = ProtocolId(protocol)
        self.rng = rng
        self.key: Optional[TcfKey] = None

    def respond(self, message: Message) -> Message:
        kind = message.get('type') if isinstance(message, dict) else None
        handler = getattr(self, f"_on_{kind}", None)
        if handler is None:
            raise ProtocolViolationError(VERIFIER, f"unexpected message type {kind!r}")
        return handler(message)

    def _on_challenge(self, message: Message) -> Message:
        m = expect_bit(expect(message, 'challenge', VERIFIER, 'm'), 'm', VERIFIER)
        return {'type': 'response', 'b': self.answer(m)}

    def answer(self, m: int) -> int:
        raise NotImplementedError


class HonestQuantumProver(_DispatchProver):
    """Claw superposition, inner-product register, Hadamard collapse, ±π/8 measurement."""

    def __init__(self, protocol: Union[ProtocolId, str], rng: np.random.Generator,
                 keep_global_phase: bool = False):
        super().__init__(protocol, rng)
        self.keep_global_phase = keep_global_phase
        self.state: Optional[qsim.SparseState] = None
        self.qubit: Optional[qsim.QubitState] = None

    def _on_key(self, message: Message) -> Message:
        self.key = parse_key(message, VERIFIER)
        claw = tcf.sample_claw(self.key, self.rng)
        self.state = qsim.superpose_claw(claw, self.key.n_bits)
        return {'type': 'y', 'value': str(claw.y)}

    def _on_branch(self, message: Message) -> Message:
        value = expect(message, 'branch', VERIFIER, 'value')['value']
        if value == BRANCH_PREIMAGE:
            (x,) = qsim.sample_basis(self.state, self.rng)
            return {'type': 'preimage', 'x': bits_to_wire(x, self.key.n_bits)}
        if value == BRANCH_EQUATION:
            r = parse_bits(message, 'r', self.key.n_bits, VERIFIER)
            return self._collapse(r, r)
        raise ProtocolViolationError(VERIFIER, f"unknown branch {value!r}")

    def _on_r(self, message: Message) -> Message:
        r0 = parse_bits(message, 'r0', self.key.n_bits, VERIFIER)
        r1 = parse_bits(message, 'r1', self.key.n_bits, VERIFIER)
        return self._collapse(r0, r1)

    def _collapse(self, r0: int, r1: int) -> Message:
        key = self.key
        state = qsim.append_inner_products(self.state, r0, r1, lambda x: tcf.preimage_type(key, x))
        d, self.qubit = qsim.hadamard_collapse(state, self.rng, self.keep_global_phase)
        return {'type': 'd', 'd': bits_to_wire(d, key.n_bits)}

    def _on_ciphertext(self, message: Message) -> Message:
        evaluator, ct = _ciphertext(message)

        def alice(x: int) -> int:
            phi0, phi1 = _ALICE_BASES[x]
            proj = np.kron(np.eye(2), np.outer(phi0, phi0.conj()))
            a, post = qsim.measure_projective(_EPR, proj, self.rng)
            phi = phi1 if a else phi0
            # index = alice + 2·bob, so rows of the reshape are Bob's basis states
            bob = post.reshape(2, 2) @ phi.conj()
            bob = bob / np.linalg.norm(bob)
            self.qubit = qsim.QubitState(complex(bob[0]), complex(bob[1]))
            return a

        return {'type': 'ciphertext', 'ct': evaluator.evaluate(ct, alice).to_dict()}

    def answer(self, m: int) -> int:
        if self.qubit is None:
            raise ProtocolViolationError(VERIFIER, "challenge arrived before Phase A completed")
        return qsim.measure_rotated(self.qubit, HONEST_ANGLES[m], self.rng)


class OptimalClassicalProver(_DispatchProver):
    """Deterministic 3/4 strategy: answer as if the α = 0 rows always applied."""

    def __init__(self, protocol: Union[ProtocolId, str], rng: np.random.Generator):
        super().__init__(protocol, rng)
        self.x: Optional[int] = None
        self.b: Optional[int] = None

    def _on_key(self, message: Message) -> Message:
        self.key = parse_key(message, VERIFIER)
        self.x = tcf.sample_domain(self.key, self.rng)
        return {'type': 'y', 'value': str(tcf.evaluate(self.key, self.x))}

    def _on_branch(self, message: Message) -> Message:
        value = expect(message, 'branch', VERIFIER, 'value')['value']
        n = self.key.n_bits
        if value == BRANCH_PREIMAGE:
            return {'type': 'preimage', 'x': bits_to_wire(self.x, n)}
        if value != BRANCH_EQUATION:
            raise ProtocolViolationError(VERIFIER, f"unknown branch {value!r}")
        self.b = dot(parse_bits(message, 'r', n, VERIFIER), self.x)
        return {'type': 'd', 'd': bits_to_wire(0, n)}

    def _on_r(self, message: Message) -> Message:
        n = self.key.n_bits
        name = 'r1' if tcf.preimage_type(self.key, self.x) else 'r0'
        self.b = dot(parse_bits(message, name, n, VERIFIER), self.x)
        return {'type': 'd', 'd': bits_to_wire(0, n)}

    def _on_ciphertext(self, message: Message) -> Message:
        evaluator, ct = _ciphertext(message)
        self.b = 0
        return {'type': 'ciphertext', 'ct': evaluator.evaluate(ct, lambda _: 0).to_dict()}

    def answer(self, m: int) -> int:
        return self.b


def honest_quantum_prover(protocol: Union[ProtocolId, str], rng: np.random.Generator) -> HonestQuantumProver:
    return HonestQuantumProver(protocol, rng)


def optimal_classical_prover(protocol: Union[ProtocolId, str], rng: np.random.Generator) -> OptimalClassicalProver:
    return OptimalClassicalProver(protocol, rng)


PROVER_KINDS = {
    'honest': honest_quantum_prover,
    'classical': optimal_classical_prover,
}


def make_prover(kind: str, protocol: Union[ProtocolId, str], rng: np.random.Generator) -> ProverRole:
    if kind not in PROVER_KINDS:
        raise ValidationError(f"Unknown prover kind {kind!r}; expected one of {sorted(PROVER_KINDS)}")
    return PROVER_KINDS[kind](protocol, rng)


# -- devices -----------------------------------------------------------------

def _complex_vector(rows) -> np.ndarray:
    return np.array([complex(re, im) for re, im in rows], dtype=complex)


def _complex_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


class DeviceFile(BaseModel):
    """On-disk device description; amplitudes are [re, im] pairs."""
    dim: int
    state: List[List[float]]
    proj0: List[List[List[float]]]
    proj1: List[List[List[float]]]

    @validator('dim')
    def validate_dim(cls, v):
        if not 1 <= v <= LIMITS['device_max_dim']:
            raise ValueError(f"dim must be in [1, {LIMITS['device_max_dim']}]")
        return v

    @validator('state')
    def validate_state(cls, v, values):
        if 'dim' in values and len(v) != values['dim']:
            raise ValueError('state length does not match dim')
        if any(len(z) != 2 for z in v):
            raise ValueError('amplitudes must be [re, im] pairs')
        return v

    @validator('proj0', 'proj1')
    def validate_projector_shape(cls, v, values):
        dim = values.get('dim')
        if dim is not None and (len(v) != dim or any(len(row) != dim for row in v)):
            raise ValueError('projector shape does not match dim')
        if any(len(z) != 2 for row in v for z in row):
            raise ValueError('matrix entries must be [re, im] pairs')
        return v


@dataclass(frozen=True, eq=False)
class Device:
    """Phase-B prover: state |ψ⟩ and the b=0 projectors Π⁰₀ and Π¹₀."""
    state: np.ndarray
    proj0: np.ndarray
    proj1: np.ndarray

    def __post_init__(self):
        state = qsim.validate_state(self.state)
        if state.shape[0] > LIMITS['device_max_dim']:
            raise ValidationError(f"Device dimension {state.shape[0]} exceeds {LIMITS['device_max_dim']}")
        object.__setattr__(self, 'state', state)
        object.__setattr__(self, 'proj0', qsim.validate_projector(self.proj0, state.shape[0]))
        object.__setattr__(self, 'proj1', qsim.validate_projector(self.proj1, state.shape[0]))

    @property
    def dim(self) -> int:
        return self.state.shape[0]

    def projector(self, m: int, b: int = 0) -> np.ndarray:
        p = self.proj0 if m == 0 else self.proj1
        return p if b == 0 else np.eye(self.dim) - p

    def to_dict(self) -> dict:
        def mat(p):
            return [[[z.real, z.imag] for z in row] for row in p]
        return {
            'dim': self.dim,
            'state': [[z.real, z.imag] for z in self.state],
            'proj0': mat(self.proj0),
            'proj1': mat(self.proj1),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Device':
        try:
            parsed = DeviceFile(**data)
        except Exception as e:
            raise ValidationError(f"Invalid device file: {e}") from e
        return cls(_complex_vector(parsed.state), _complex_matrix(parsed.proj0), _complex_matrix(parsed.proj1))

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'Device':
        with open(path, 'r') as f:
            return cls.from_dict(json.load(f))

    def save(self, path: Union[str, Path]):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass(frozen=True)
class DeviceOutcomePair:
    b0: int
    b1: int
    parity: int
    correct: bool


def correct_projectors(device: Device, c_hat0: int, c_hat1: int) -> Tuple[np.ndarray, np.ndarray]:
    """Q_m: projector onto the outcome accepted for challenge m."""
    for c in (c_hat0, c_hat1):
        if c not in (-1, 1):
            raise ValidationError(f"ĉ must be ±1, got {c!r}")
    return device.projector(0, 0 if c_hat0 == 1 else 1), device.projector(1, 0 if c_hat1 == 1 else 1)


def device_phase_b(device: Device, m: int, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    if m not in (0, 1):
        raise ValidationError(f"Challenge must be a bit, got {m!r}")
    return qsim.measure_projective(device.state, device.projector(m), rng)


def parity_adversary(device: Device, c_hat0: int, c_hat1: int, rng: np.random.Generator) -> DeviceOutcomePair:
    """Measure challenge 0 then challenge 1 on the post-measurement state; guess b0 ⊕ b1."""
    b0, post = qsim.measure_projective(device.state, device.proj0, rng)
    b1, _ = qsim.measure_projective(post, device.proj1, rng)
    parity = b0 ^ b1
    return DeviceOutcomePair(b0, b1, parity, (1 - 2 * parity) == c_hat0 * c_hat1)


class DeviceProver(ProverRole):
    """Phase-B-only prover backed by a Device."""

    def __init__(self, device: Device, protocol: Union[ProtocolId, str], rng: np.random.Generator):
        self.device = device
        self.protocol = ProtocolId(protocol)
        self.rng = rng

    def respond(self, message: Message) -> Message:
        m = expect_bit(expect(message, 'challenge', VERIFIER, 'm'), 'm', VERIFIER)
        b, _ = device_phase_b(self.device, m, self.rng)
        return {'type': 'response', 'b': b}
