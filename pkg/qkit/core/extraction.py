"""
Quantum Goldreich-Levin extraction and the claw-extraction reductions.

The GL circuit spends n Hadamards preparing the uniform input superposition,
one query U, one Z on the predicted output qubit (the phase kickback of a CX
into a |−⟩ qubit, which factors out of the state), one inverse query U†, and
n final Hadamards before measuring the input register.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from qkit.config import TOLERANCES
from qkit.core import tcf
from qkit.core.qsim import GateCircuit, Layout
from qkit.core.rng import dot
from qkit.core.tcf import TcfKey, TcfTrapdoor
from qkit.error_handler import CapacityError, ValidationError
from qkit.performance_monitor import wilson_interval

logger = logging.getLogger(__name__)

OUTPUT_REGISTER = 'out'


class DenseUnitary:
    """Explicit unitary matrix over a register layout, with the GateCircuit apply/inverse surface."""

    def __init__(self, registers: Layout, matrix: np.ndarray):
        self._layout = GateCircuit(registers)
        self.registers = self._layout.registers
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (self._layout.dim, self._layout.dim):
            raise ValidationError(f"Unitary shape {m.shape} does not match {self._layout.dim}")
        if not np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=TOLERANCES['unitary']):
            raise ValidationError("Query matrix is not unitary")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self._layout.dim

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi

    def inverse(self) -> 'DenseUnitary':
        return DenseUnitary(self.registers, self.matrix.conj().T)

    def index(self, values: Dict[str, int]) -> int:
        return self._layout.index(values)

    def register_value(self, idx, name: str):
        return self._layout.register_value(idx, name)


Query = Union[GateCircuit, DenseUnitary]


def embed(registers: Layout, inits: Dict[str, np.ndarray]) -> np.ndarray:
    """Product state over a layout; registers missing from inits start in |0⟩."""
    vec = np.ones(1, dtype=complex)
    for name, width in registers:
        init = inits.get(name)
        if init is None:
            init = np.zeros(1 << width, dtype=complex)
            init[0] = 1
        init = np.asarray(init, dtype=complex).reshape(-1)
        if init.shape[0] != 1 << width:
            raise ValidationError(f"Initial state for {name} has the wrong dimension")
        vec = np.kron(init, vec)
    return vec


@dataclass
class InnerProductQuery:
    """Unitary predictor U|x⟩|aux⟩|0⟩ whose output qubit guesses a·x."""
    n: int
    apply: Query
    aux_init: Dict[str, np.ndarray] = field(default_factory=dict)
    input_register: str = 'x'
    output_qubit: int = 0

    def __post_init__(self):
        if not isinstance(self.apply, (GateCircuit, DenseUnitary)):
            raise ValidationError(
                "Predictors must be explicit unitaries (gate list or dense matrix); "
                "sampled-only callables cannot be run coherently")
        layout = dict(self.apply.registers)
        if layout.get(self.input_register) != self.n:
            raise ValidationError(f"Query needs a {self.n}-qubit {self.input_register!r} register")
        if not 0 <= self.output_qubit < layout.get(OUTPUT_REGISTER, 0):
            raise ValidationError(f"Query has no output qubit {OUTPUT_REGISTER}[{self.output_qubit}]")
        for name, vec in self.aux_init.items():
            if name in (self.input_register, OUTPUT_REGISTER) or name not in layout:
                raise ValidationError(f"aux_init names a non-auxiliary register {name!r}")
            vec = np.asarray(vec, dtype=complex)
            if abs(np.vdot(vec, vec).real - 1) > TOLERANCES['norm_loose']:
                raise ValidationError(f"aux_init for {name!r} is not normalized")

    @property
    def registers(self) -> Layout:
        return self.apply.registers

    def initial_state(self, x_state: np.ndarray) -> np.ndarray:
        inits = dict(self.aux_init)
        inits[self.input_register] = x_state
        return embed(self.registers, inits)

    def _basis_input(self, x: int) -> np.ndarray:
        e = np.zeros(1 << self.n, dtype=complex)
        e[x] = 1
        return e

    def output_bits(self, idx: np.ndarray) -> np.ndarray:
        return (self.apply.register_value(idx, OUTPUT_REGISTER) >> self.output_qubit) & 1


def check_register_restitution(q: InnerProductQuery) -> bool:
    """Every basis input x leaves the input register holding x after U."""
    idx = np.arange(q.apply.dim)
    inputs = q.apply.register_value(idx, q.input_register)
    for x in range(1 << q.n):
        out = q.apply.apply(q.initial_state(q._basis_input(x)))
        stray = np.sum(np.abs(out[inputs != x]) ** 2)
        if stray > TOLERANCES['unitary']:
            raise ValidationError(f"Query disturbs the input register on x={x} (weight {stray:.3e})")
    return True


def exact_bias(q: InnerProductQuery, a: int) -> float:
    """ε = Pr_x[w = a·x] − 1/2 with x uniform."""
    idx = np.arange(q.apply.dim)
    bits = q.output_bits(idx)
    total = 0.0
    for x in range(1 << q.n):
        out = q.apply.apply(q.initial_state(q._basis_input(x)))
        probs = np.abs(out) ** 2
        total += float(np.sum(probs[bits == dot(a, x)]))
    return total / (1 << q.n) - 0.5


def estimate_bias(q: InnerProductQuery, a: int, rng: np.random.Generator,
                  samples: int, confidence: float = None) -> Tuple[float, Tuple[float, float]]:
    """Monte-Carlo ε with a Wilson interval on the underlying success probability."""
    idx = np.arange(q.apply.dim)
    bits = q.output_bits(idx)
    per_x = []
    for x in range(1 << q.n):
        probs = np.abs(q.apply.apply(q.initial_state(q._basis_input(x)))) ** 2
        per_x.append(float(np.sum(probs[bits == dot(a, x)])))
    xs = rng.integers(0, 1 << q.n, size=samples)
    hits = int(np.sum(rng.random(samples) < np.asarray(per_x)[xs]))
    lo, hi = wilson_interval(hits, samples, confidence)
    return hits / samples - 0.5, (lo - 0.5, hi - 0.5)


def _gl_final_state(q: InnerProductQuery) -> np.ndarray:
    uniform = np.full(1 << q.n, 1 / math.sqrt(1 << q.n), dtype=complex)
    psi = q.apply.apply(q.initial_state(uniform))
    bits = q.output_bits(np.arange(q.apply.dim))
    psi = np.where(bits == 1, -psi, psi)
    psi = q.apply.inverse().apply(psi)
    hadamards = GateCircuit(q.registers)
    for i in range(q.n):
        hadamards.add('H', (q.input_register, i))
    return hadamards.apply(psi)


def gl_distribution(q: InnerProductQuery) -> np.ndarray:
    """Exact distribution of the measured input register."""
    psi = _gl_final_state(q)
    inputs = q.apply.register_value(np.arange(q.apply.dim), q.input_register)
    probs = np.bincount(inputs, weights=np.abs(psi) ** 2, minlength=1 << q.n)
    return probs / probs.sum()


def gl_run(q: InnerProductQuery, rng: np.random.Generator) -> Tuple[int, np.ndarray, Layout]:
    """Run the GL circuit; return the candidate and the normalized state of the other registers."""
    psi = _gl_final_state(q)
    inputs = q.apply.register_value(np.arange(q.apply.dim), q.input_register)
    probs = np.bincount(inputs, weights=np.abs(psi) ** 2, minlength=1 << q.n)
    candidate = int(rng.choice(1 << q.n, p=probs / probs.sum()))
    rest = psi[inputs == candidate]
    rest = rest / np.linalg.norm(rest)
    rest_layout = tuple((name, w) for name, w in q.registers if name != q.input_register)
    return candidate, rest, rest_layout


def gl_extract(q: InnerProductQuery, rng: np.random.Generator) -> int:
    """One candidate for a; succeeds with probability at least 4ε²."""
    candidate, _, _ = gl_run(q, rng)
    return candidate


# -- predictors --------------------------------------------------------------

def _coin_state(epsilon: float) -> np.ndarray:
    if not 0 <= epsilon <= 0.5:
        raise ValidationError(f"Advantage must lie in [0, 1/2], got {epsilon}")
    s = 1 - 2 * epsilon
    return np.array([math.sqrt(1 - s), math.sqrt(s)], dtype=complex)


def inner_product_predictor(a: int, n: int, epsilon: float = 0.5, input_register: str = 'x',
                            extra_registers: Tuple[Tuple[str, int], ...] = ()) -> InnerProductQuery:
    """w = a·x, flipped when x_0 = 1 and a coin qubit is 1.

    The coin starts in √(2ε)|0⟩ + √(1−2ε)|1⟩, giving advantage exactly ε.
    """
    registers = ((input_register, n),) + tuple(extra_registers) + (('coin', 1), (OUTPUT_REGISTER, 1))
    circuit = GateCircuit(registers)
    for i in range(n):
        if (a >> i) & 1:
            circuit.add('CX', (input_register, i), (OUTPUT_REGISTER, 0))
    if epsilon < 0.5:
        circuit.add('CCX', (input_register, 0), ('coin', 0), (OUTPUT_REGISTER, 0))
    return InnerProductQuery(n, circuit, {'coin': _coin_state(epsilon)}, input_register)


@dataclass(frozen=True)
class ExtractionOutcome:
    candidate: int
    verified: bool
    trials: int
    x0: Optional[int] = None
    x1: Optional[int] = None


def _ordered(key: TcfKey, x: int, z: int) -> Tuple[int, int]:
    return (x, z) if tcf.preimage_type(key, x) == 0 else (z, x)


# -- simplified protocol reduction -------------------------------------------

@dataclass
class SimplifiedAdversary:
    """Phase A returns y; the guesser turns (key, y) into a predictor of r·(x0∥x1) over r = r0∥r1."""
    phase_a: Callable[[TcfKey, np.random.Generator], int]
    guesser: Callable[[TcfKey, int], InnerProductQuery]


def honest_form_phase_a(key: TcfKey, rng: np.random.Generator) -> int:
    return tcf.sample_claw(key, rng).y


def trapdoor_simplified_adversary(trapdoor: TcfTrapdoor, delta: float = 0.5) -> SimplifiedAdversary:
    """Guesser with parity advantage δ, built with trapdoor access."""
    def guesser(key: TcfKey, y: int) -> InnerProductQuery:
        claw = tcf.invert(trapdoor, key, y)
        secret = claw.x0 | (claw.x1 << key.n_bits)
        return inner_product_predictor(secret, 2 * key.n_bits, delta, input_register='r')
    return SimplifiedAdversary(honest_form_phase_a, guesser)


def claw_from_simplified(adversary: SimplifiedAdversary, key: TcfKey, rng: np.random.Generator,
                         trapdoor: Optional[TcfTrapdoor] = None, max_trials: int = 1) -> ExtractionOutcome:
    """GL over superposed r = r0∥r1 yields x0∥x1; retried up to max_trials times."""
    n = key.n_bits
    if 2 * n + 2 > 12:
        raise CapacityError(f"n={n} needs more than 12 simulated qubits")
    candidate = 0
    for trial in range(1, max_trials + 1):
        y = adversary.phase_a(key, rng)
        query = adversary.guesser(key, y)
        if query.input_register != 'r' or query.n != 2 * n:
            raise ValidationError("Simplified guesser must predict over a 2n-qubit 'r' register")
        check_register_restitution(query)
        candidate = gl_extract(query, rng)
        x0, x1 = candidate & ((1 << n) - 1), candidate >> n
        verified = tcf.is_claw(key, x0, x1) and tcf.evaluate(key, x0) == y
        if verified and trapdoor is not None:
            expected = tcf.invert(trapdoor, key, y)
            verified = {x0, x1} == {expected.x0, expected.x1}
        if verified:
            x0, x1 = _ordered(key, x0, x1)
            return ExtractionOutcome(candidate, True, trial, x0, x1)
    return ExtractionOutcome(candidate, False, max_trials)


# -- KCVY reduction ----------------------------------------------------------

PreimagePiece = Callable[[TcfKey, int, Layout], Tuple[GateCircuit, Dict[str, np.ndarray]]]


@dataclass
class KcvyAdversary:
    """Phase A yields y with a workspace state; two coherent pieces answer m′ = 1 and m′ = 0.

    equation(key, y) is a predictor of r·(x0⊕x1) over registers (r, work, ..., out).
    preimage(key, y) acts on the registers left after measuring r, plus new ones
    (initialized by its dict), and writes a preimage guess into 'pre'.
    """
    phase_a: Callable[[TcfKey, np.random.Generator], Tuple[int, np.ndarray]]
    equation: Callable[[TcfKey, int], InnerProductQuery]
    preimage: PreimagePiece


def claw_state_phase_a(key: TcfKey, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    claw = tcf.sample_claw(key, rng)
    work = np.zeros(1 << key.n_bits, dtype=complex)
    work[claw.x0] = work[claw.x1] = 1 / math.sqrt(2)
    return claw.y, work


def _flip_preimage(trapdoor: TcfTrapdoor, kappa: float) -> PreimagePiece:
    """Copy 'work' into 'pre', then flip one bit off the claw with probability κ."""
    if not 0 <= kappa <= 1:
        raise ValidationError(f"κ must lie in [0, 1], got {kappa}")

    def preimage(key: TcfKey, y: int, rest: Layout) -> Tuple[GateCircuit, Dict[str, np.ndarray]]:
        n = key.n_bits
        claw = tcf.invert(trapdoor, key, y)
        # flipping a bit j with e_j ≠ Δ always leaves the claw
        j = 1 if claw.delta == 1 else 0
        circuit = GateCircuit(tuple(rest) + (('pre', n), ('kappa', 1)))
        for i in range(n):
            circuit.add('CX', ('work', i), ('pre', i))
        circuit.add('CX', ('kappa', 0), ('pre', j))
        return circuit, {'kappa': np.array([math.sqrt(1 - kappa), math.sqrt(kappa)], dtype=complex)}

    return preimage


def trapdoor_kcvy_adversary(trapdoor: TcfTrapdoor, delta: float = 0.5, kappa: float = 0.0) -> KcvyAdversary:
    """Equation advantage δ; the preimage piece errs with probability κ."""
    preimage = _flip_preimage(trapdoor, kappa)

    def equation(key: TcfKey, y: int) -> InnerProductQuery:
        claw = tcf.invert(trapdoor, key, y)
        q = inner_product_predictor(claw.delta, key.n_bits, delta, input_register='r',
                                    extra_registers=(('work', key.n_bits),))
        return q

    return KcvyAdversary(claw_state_phase_a, equation, preimage)


def work_coupled_kcvy_adversary(trapdoor: TcfTrapdoor, delta: float = 0.5,
                                kappa: float = 0.0) -> KcvyAdversary:
    """Like trapdoor_kcvy_adversary, but the equation error is controlled by the claw state.

    The answer flips when r_0 = 1, the coin is 1 and bit j of 'work' is 1, with j the
    lowest set bit of Δ, so exactly one of the two claw branches triggers it. With the
    coin at advantage ε_B the bias is 1/4 + ε_B/2, so δ must lie in [1/4, 1/2].
    Extraction leaves 'work' unbalanced between x0 and x1.
    """
    if not 0.25 <= delta <= 0.5:
        raise ValidationError(f"δ must lie in [1/4, 1/2] for the coupled adversary, got {delta}")
    coin_bias = 2 * delta - 0.5
    preimage = _flip_preimage(trapdoor, kappa)

    def equation(key: TcfKey, y: int) -> InnerProductQuery:
        claw = tcf.invert(trapdoor, key, y)
        j = (claw.delta & -claw.delta).bit_length() - 1
        q = inner_product_predictor(claw.delta, key.n_bits, 0.5, input_register='r',
                                    extra_registers=(('work', key.n_bits), ('anc', 1)))
        q.aux_init['coin'] = _coin_state(coin_bias)
        (q.apply
         .add('CCX', ('coin', 0), ('work', j), ('anc', 0))
         .add('CCX', ('r', 0), ('anc', 0), (OUTPUT_REGISTER, 0))
         .add('CCX', ('coin', 0), ('work', j), ('anc', 0)))
        return q

    return KcvyAdversary(claw_state_phase_a, equation, preimage)


def kcvy_disturbance_bound(delta: float, kappa: float) -> float:
    """Lower bound 1 − κ − √(1 − 4δ²) on the claw-extraction probability."""
    return 1 - kappa - math.sqrt(max(0.0, 1 - 4 * delta * delta))


def claw_from_kcvy(adversary: KcvyAdversary, key: TcfKey, rng: np.random.Generator,
                   max_trials: int = 1) -> ExtractionOutcome:
    """GL on the equation piece gives x0⊕x1; the preimage piece on the leftover state gives one x."""
    n = key.n_bits
    candidate = 0
    for trial in range(1, max_trials + 1):
        y, work = adversary.phase_a(key, rng)
        query = adversary.equation(key, y)
        if query.input_register != 'r' or query.n != n or 'work' not in dict(query.registers):
            raise ValidationError("KCVY equation piece must predict over 'r' with a 'work' register")
        query.aux_init['work'] = work
        check_register_restitution(query)
        candidate, rest, rest_layout = gl_run(query, rng)

        circuit, inits = adversary.preimage(key, y, rest_layout)
        if tuple(circuit.registers[:len(rest_layout)]) != tuple(rest_layout):
            raise ValidationError("Preimage piece must extend the post-measurement registers")
        extra = circuit.registers[len(rest_layout):]
        psi = np.kron(embed(extra, inits), rest)
        psi = circuit.apply(psi)
        probs = np.abs(psi) ** 2
        pre = np.bincount(circuit.register_value(np.arange(circuit.dim), 'pre'),
                          weights=probs, minlength=1 << n)
        x = int(rng.choice(1 << n, p=pre / pre.sum()))

        partner = x ^ candidate
        if candidate and tcf.is_claw(key, x, partner) and tcf.evaluate(key, x) == y:
            x0, x1 = _ordered(key, x, partner)
            return ExtractionOutcome(candidate, True, trial, x0, x1)
    return ExtractionOutcome(candidate, False, max_trials)


def extraction_frequency(run: Callable[[np.random.Generator], ExtractionOutcome],
                         rng: np.random.Generator, runs: int, confidence: float = None) -> Dict:
    """Repeat a single-shot extraction and summarize how often a verified claw comes out."""
    verified = 0
    for _ in range(runs):
        outcome = run(rng)
        verified += int(outcome.verified)
    lo, hi = wilson_interval(verified, runs, confidence)
    return {'runs': runs, 'verified': verified, 'frequency': verified / runs, 'wilson_interval': [lo, hi]}
