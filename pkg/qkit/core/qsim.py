"""
Small quantum simulator.

SparseState covers the honest prover's pipeline (claw superposition, inner
product register, Hadamard collapse onto a residual qubit). GateCircuit is a
dense little-endian simulator of at most 12 qubits, used by claw extraction.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from qkit.config import LIMITS, TOLERANCES
from qkit.core.rng import dot, random_bits
from qkit.core.tcf import Claw
from qkit.error_handler import (
    CapacityError,
    InvalidClawError,
    NormalizationError,
    OracleError,
    ValidationError,
)

logger = logging.getLogger(__name__)

Label = Tuple[int, ...]
Layout = Tuple[Tuple[str, int], ...]


@dataclass(frozen=True)
class SparseState:
    """Complex amplitudes keyed by a tuple of register values."""
    layout: Layout
    amplitudes: Dict[Label, complex] = field(hash=False)

    def __post_init__(self):
        for label in self.amplitudes:
            if len(label) != len(self.layout):
                raise ValidationError(f"Label {label} does not match layout {self.layout}")
            for value, (name, width) in zip(label, self.layout):
                if not 0 <= value < 1 << width:
                    raise ValidationError(f"Register {name} value {value} exceeds {width} bits")
        if abs(self.norm_squared() - 1.0) > TOLERANCES['norm_loose']:
            raise NormalizationError(f"State norm² {self.norm_squared()} is not 1")

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    @property
    def n_qubits(self) -> int:
        return sum(width for _, width in self.layout)

    def pruned(self) -> 'SparseState':
        kept = {k: a for k, a in self.amplitudes.items() if abs(a) > TOLERANCES['prune']}
        return SparseState(self.layout, kept)

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > LIMITS['dense_max_qubits']:
            raise CapacityError(f"{self.n_qubits} qubits exceed the dense simulation budget")
        psi = np.zeros(1 << self.n_qubits, dtype=complex)
        for label, amp in self.amplitudes.items():
            psi[_pack(label, self.layout)] = amp
        return psi

    @classmethod
    def from_dense(cls, psi: np.ndarray, layout: Layout) -> 'SparseState':
        amps = {}
        for idx in np.flatnonzero(np.abs(psi) > TOLERANCES['prune']):
            amps[_unpack(int(idx), layout)] = complex(psi[idx])
        return cls(layout, amps)


@dataclass(frozen=True)
class QubitState:
    a0: complex
    a1: complex

    def norm_squared(self) -> float:
        return abs(self.a0) ** 2 + abs(self.a1) ** 2

    def check(self):
        if abs(self.norm_squared() - 1.0) > TOLERANCES['norm']:
            raise NormalizationError(f"Qubit norm² {self.norm_squared()} is not 1")


def _pack(label: Label, layout: Layout) -> int:
    idx, offset = 0, 0
    for value, (_, width) in zip(label, layout):
        idx |= value << offset
        offset += width
    return idx


def _unpack(idx: int, layout: Layout) -> Label:
    out = []
    for _, width in layout:
        out.append(idx & ((1 << width) - 1))
        idx >>= width
    return tuple(out)


# -- honest-prover pipeline --------------------------------------------------

def superpose_claw(claw: Claw, n_bits: Optional[int] = None) -> SparseState:
    """(|x0⟩ + |x1⟩)/√2 on a single register x."""
    if claw.x0 == claw.x1:
        raise InvalidClawError(f"Claw elements coincide: {claw.x0}")
    width = n_bits or max(claw.x0.bit_length(), claw.x1.bit_length(), 1)
    amp = complex(1 / math.sqrt(2))
    return SparseState((('x', width),), {(claw.x0,): amp, (claw.x1,): amp})


def append_inner_products(state: SparseState, r0: int, r1: int,
                          type_fn: Callable[[int], Any]) -> SparseState:
    """Give each branch x_b a bit register holding r_b·x_b.

    The type ancilla selecting r_b is computed from x and uncomputed again, so
    it leaves no trace in the output.
    """
    if [name for name, _ in state.layout] != ['x']:
        raise ValidationError(f"Expected a claw register, got layout {state.layout}")
    amplitudes = {}
    for (x,), amp in state.amplitudes.items():
        b = type_fn(x)
        if isinstance(b, bool) or b not in (0, 1):
            raise OracleError(f"Type oracle returned {b!r} for branch {x}")
        r = r1 if b else r0
        amplitudes[(x, dot(r, x))] = amp
    return SparseState(state.layout + (('ip', 1),), amplitudes)


def hadamard_collapse(state: SparseState, rng: np.random.Generator,
                      keep_global_phase: bool = False) -> Tuple[int, QubitState]:
    """Hadamard the x register, measure it as d, return the residual ip qubit.

    d is sampled without touching the 2^n Hadamard amplitudes. When the two
    branches carry different bits, d is uniform. When they carry the same bit,
    the parity d·(x0⊕x1) follows |a ± b|²/2 and d is uniform in that coset.
    """
    if [name for name, _ in state.layout] != ['x', 'ip'] or len(state.amplitudes) != 2:
        raise ValidationError("hadamard_collapse needs a two-branch (x, ip) state")
    (label0, a), (label1, b) = sorted(state.amplitudes.items())
    (x0, bit0), (x1, bit1) = label0, label1
    if x0 == x1:
        raise ValidationError("Branches share the same x value")
    n = state.layout[0][1]
    delta = x0 ^ x1

    d = random_bits(rng, n)
    if bit0 == bit1:
        p_even = abs(a + b) ** 2 / 2
        target = 0 if rng.random() < p_even else 1
        if dot(d, delta) != target:
            d ^= delta & -delta
        sign = -1 if target else 1
        amp = (a + sign * b) / math.sqrt(2)
        amp = amp / abs(amp)
        pair = (amp, 0j) if bit0 == 0 else (0j, amp)
    else:
        sign = -1 if dot(d, delta) else 1
        pair = (a, sign * b) if bit0 == 0 else (sign * b, a)

    if keep_global_phase and dot(d, x0):
        pair = (-pair[0], -pair[1])
    return d, QubitState(complex(pair[0]), complex(pair[1]))


def sample_basis(state: SparseState, rng: np.random.Generator) -> Label:
    """Computational-basis measurement of every register."""
    labels = sorted(state.amplitudes)
    probs = np.array([abs(state.amplitudes[k]) ** 2 for k in labels])
    return labels[int(rng.choice(len(labels), p=probs / probs.sum()))]


def measure_rotated(q: QubitState, theta: float, rng: np.random.Generator) -> int:
    """Measure in {|θ⟩, |θ+π/2⟩} with |θ⟩ = cosθ|0⟩ + sinθ|1⟩; 0 means |θ⟩."""
    q.check()
    p0 = abs(math.cos(theta) * q.a0 + math.sin(theta) * q.a1) ** 2
    return 0 if rng.random() < p0 else 1


# -- dense measurements ------------------------------------------------------

def validate_projector(proj: np.ndarray, dim: Optional[int] = None, tol: float = None) -> np.ndarray:
    """Return proj as a complex matrix after checking P = P† = P²."""
    tol = TOLERANCES['projector'] if tol is None else tol
    proj = np.asarray(proj, dtype=complex)
    if proj.ndim != 2 or proj.shape[0] != proj.shape[1]:
        raise ValidationError(f"Projector must be square, got shape {proj.shape}")
    if dim is not None and proj.shape[0] != dim:
        raise ValidationError(f"Projector dimension {proj.shape[0]} does not match {dim}")
    if np.max(np.abs(proj - proj.conj().T), initial=0.0) > tol:
        raise ValidationError("Projector is not Hermitian")
    if np.max(np.abs(proj @ proj - proj), initial=0.0) > tol:
        raise ValidationError("Projector is not idempotent")
    return proj


def validate_state(psi: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.shape[0] != dim:
        raise ValidationError(f"State dimension {psi.shape[0]} does not match {dim}")
    if abs(np.vdot(psi, psi).real - 1.0) > TOLERANCES['norm_loose']:
        raise NormalizationError("State is not unit norm")
    return psi


def measure_projective(state: Union[np.ndarray, SparseState], projector: np.ndarray,
                       rng: np.random.Generator) -> Tuple[int, Union[np.ndarray, SparseState]]:
    """Two-outcome measurement {P, I-P}; outcome 0 is P."""
    sparse_layout = state.layout if isinstance(state, SparseState) else None
    psi = state.to_dense() if sparse_layout else validate_state(state)
    proj = validate_projector(projector, psi.shape[0])

    projected = proj @ psi
    branches = (projected, psi - projected)
    weights = [float(np.vdot(b, b).real) for b in branches]
    p0 = float(np.clip(weights[0] / sum(weights), 0.0, 1.0))
    outcome = 0 if rng.random() < p0 else 1
    # a branch at pruning level cannot be renormalized
    if weights[outcome] <= TOLERANCES['prune']:
        outcome = 1 - outcome
    post = branches[outcome] / math.sqrt(weights[outcome])
    if sparse_layout:
        return outcome, SparseState.from_dense(post, sparse_layout)
    return outcome, post


# -- dense gate circuits -----------------------------------------------------

_FIXED_GATES = {
    'H': np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}
_ARITY = {'H': 1, 'X': 1, 'Z': 1, 'U': 1, 'CX': 2, 'CCX': 3}

Qubit = Tuple[str, int]


@dataclass(frozen=True)
class Gate:
    op: str
    qubits: Tuple[Qubit, ...]
    matrix: Optional[Tuple[Tuple[complex, complex], Tuple[complex, complex]]] = None

    def to_dict(self) -> Dict:
        out = {'op': self.op, 'qubits': [[r, i] for r, i in self.qubits]}
        if self.matrix is not None:
            out['matrix'] = [[[z.real, z.imag] for z in row] for row in self.matrix]
        return out


class GateCircuit:
    """Gate list over named registers, little-endian with the first register at offset 0."""

    def __init__(self, registers: Sequence[Tuple[str, int]], gates: Sequence[Gate] = ()):
        self.registers: Layout = tuple((str(name), int(width)) for name, width in registers)
        names = [name for name, _ in self.registers]
        if len(set(names)) != len(names):
            raise ValidationError(f"Duplicate register names in {names}")
        if self.n_qubits > LIMITS['dense_max_qubits']:
            raise CapacityError(
                f"{self.n_qubits} qubits exceed the {LIMITS['dense_max_qubits']}-qubit budget")
        self.offsets: Dict[str, int] = {}
        offset = 0
        for name, width in self.registers:
            self.offsets[name] = offset
            offset += width
        self.gates: List[Gate] = []
        for gate in gates:
            self.append(gate)

    @property
    def n_qubits(self) -> int:
        return sum(width for _, width in self.registers)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def qubit_index(self, qubit: Qubit) -> int:
        name, i = qubit
        width = dict(self.registers).get(name)
        if width is None or not 0 <= i < width:
            raise ValidationError(f"Unknown qubit {name}[{i}]")
        return self.offsets[name] + i

    def append(self, gate: Gate) -> 'GateCircuit':
        if gate.op not in _ARITY:
            raise ValidationError(f"Unsupported gate {gate.op!r}")
        if len(gate.qubits) != _ARITY[gate.op]:
            raise ValidationError(f"{gate.op} acts on {_ARITY[gate.op]} qubits")
        indices = [self.qubit_index(q) for q in gate.qubits]
        if len(set(indices)) != len(indices):
            raise ValidationError(f"{gate.op} repeats a qubit")
        if gate.op == 'U':
            m = np.asarray(gate.matrix, dtype=complex)
            if m.shape != (2, 2) or not np.allclose(m @ m.conj().T, np.eye(2), atol=TOLERANCES['unitary']):
                raise ValidationError("U gate matrix is not a 2x2 unitary")
        self.gates.append(gate)
        return self

    def add(self, op: str, *qubits: Qubit, matrix=None) -> 'GateCircuit':
        if matrix is not None:
            matrix = tuple(tuple(complex(z) for z in row) for row in np.asarray(matrix))
        return self.append(Gate(op, tuple((str(r), int(i)) for r, i in qubits), matrix))

    def extend(self, other: 'GateCircuit') -> 'GateCircuit':
        for gate in other.gates:
            self.append(gate)
        return self

    def inverse(self) -> 'GateCircuit':
        inv = GateCircuit(self.registers)
        for gate in reversed(self.gates):
            if gate.op == 'U':
                m = np.asarray(gate.matrix, dtype=complex).conj().T
                inv.add('U', *gate.qubits, matrix=m)
            else:
                inv.append(gate)
        return inv

    def index(self, values: Dict[str, int]) -> int:
        """Basis index for a register-value assignment; omitted registers are 0."""
        idx = 0
        for name, value in values.items():
            width = dict(self.registers)[name]
            if not 0 <= value < 1 << width:
                raise ValidationError(f"{name}={value} exceeds {width} bits")
            idx |= value << self.offsets[name]
        return idx

    def register_value(self, idx: Union[int, np.ndarray], name: str):
        width = dict(self.registers)[name]
        return (idx >> self.offsets[name]) & ((1 << width) - 1)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        psi = np.array(psi, dtype=complex).reshape(-1)
        if psi.shape[0] != self.dim:
            raise ValidationError(f"State dimension {psi.shape[0]} does not match {self.dim}")
        basis = np.arange(self.dim)
        for gate in self.gates:
            q = [self.qubit_index(x) for x in gate.qubits]
            if gate.op in ('X', 'CX', 'CCX'):
                controls = np.ones(self.dim, dtype=bool)
                for c in q[:-1]:
                    controls &= ((basis >> c) & 1).astype(bool)
                source = np.where(controls, basis ^ (1 << q[-1]), basis)
                psi = psi[source]
            elif gate.op == 'Z':
                psi = np.where((basis >> q[0]) & 1, -psi, psi)
            else:
                m = _FIXED_GATES['H'] if gate.op == 'H' else np.asarray(gate.matrix, dtype=complex)
                psi = _apply_one_qubit(psi, m, q[0], self.n_qubits)
        return psi

    def unitary(self) -> np.ndarray:
        return np.column_stack([self.apply(np.eye(self.dim, dtype=complex)[:, k]) for k in range(self.dim)])

    def to_dict(self) -> Dict:
        return {'registers': [[n, w] for n, w in self.registers],
                'gates': [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'GateCircuit':
        try:
            circuit = cls([(n, w) for n, w in data['registers']])
            for g in data['gates']:
                matrix = None
                if 'matrix' in g:
                    matrix = [[complex(re, im) for re, im in row] for row in g['matrix']]
                circuit.add(g['op'], *[(r, i) for r, i in g['qubits']], matrix=matrix)
            return circuit
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"Malformed gate list: {e}") from e


def _apply_one_qubit(psi: np.ndarray, m: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    # C-order reshape puts the most significant qubit on axis 0
    axis = n_qubits - 1 - qubit
    t = psi.reshape([2] * n_qubits)
    t = np.tensordot(m, t, axes=([1], [axis]))
    t = np.moveaxis(t, 0, axis)
    return t.reshape(-1)
