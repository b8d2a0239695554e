"""
Numerical analysis of two-outcome Phase-B devices.

Given the accepted-outcome projectors Q0, Q1 and the post-Phase-A state ψ, the
Jordan decomposition splits the space into blocks of dimension at most two
that both projectors stabilize. Block weights and angles give the success
probabilities p0, p1, the parity-adversary success p_xor, the soundness
slacks, the qubit-test anti-commutator and the deviation moments.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from qkit.config import LIMITS, OMEGA_CLASSICAL, OMEGA_QUANTUM, TOLERANCES
from qkit.core.provers import Device
from qkit.core.qsim import validate_projector, validate_state
from qkit.error_handler import ValidationError

logger = logging.getLogger(__name__)

GRID_EDGE = 3 * math.pi / 16
# intersections are detected from ‖(I−Q1)v‖ and ‖Q1 v‖ directly, not from 1 − cos²θ
_SPLIT_TOL = 1e-10


@dataclass
class JordanBlock:
    weight: float
    alpha: float
    beta: float
    basis: Tuple[np.ndarray, ...]
    dim: int
    theta: float
    form_residual: float = 0.0

    @property
    def p_xor(self) -> float:
        """Parity-adversary success inside the block, cos² of the principal angle."""
        return math.cos(self.theta) ** 2

    @property
    def coplanar(self) -> bool:
        return self.form_residual <= TOLERANCES['jordan']

    def to_row(self) -> Dict:
        return {'t': self.weight, 'alpha': self.alpha, 'beta': self.beta, 'dim': self.dim,
                'theta': self.theta, 'form_residual': self.form_residual}


@dataclass
class JordanReport:
    blocks: List[JordanBlock]
    p0: float
    p1: float
    p_xor: float
    delta: float
    quantum_slack: float
    classical_diag: bool
    reconstruction_error: float = 0.0
    dim: int = 0

    @property
    def success(self) -> float:
        return (self.p0 + self.p1) / 2

    def to_dict(self) -> Dict:
        return {
            'dim': self.dim,
            'p0': self.p0,
            'p1': self.p1,
            'p_xor': self.p_xor,
            'success': self.success,
            'delta': self.delta,
            'quantum_slack': self.quantum_slack,
            'classical_diag': self.classical_diag,
            'reconstruction_error': self.reconstruction_error,
            'blocks': [b.to_row() for b in self.blocks],
        }


def _fold(angle: float) -> float:
    """Map into [−π/2, π/2)."""
    return (angle + math.pi / 2) % math.pi - math.pi / 2


def _range_basis(proj: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(proj)
    keep = vals > 0.5
    return vecs[:, keep], vecs[:, ~keep]


def _validate_inputs(Q0, Q1, psi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    psi = validate_state(psi)
    dim = psi.shape[0]
    if dim > LIMITS['device_max_dim']:
        raise ValidationError(f"Dimension {dim} exceeds {LIMITS['device_max_dim']}")
    return validate_projector(Q0, dim), validate_projector(Q1, dim), psi


def _two_dim_block(v: np.ndarray, q: np.ndarray, w: np.ndarray, psi: np.ndarray) -> JordanBlock:
    """Angles of rank-1 Q0 = |v⟩⟨v|, Q1 = |q⟩⟨q| on span{v, w} in the basis fixed by ψ."""
    cu, cw = np.vdot(v, psi), np.vdot(w, psi)
    weight = float(abs(cu) ** 2 + abs(cw) ** 2)
    if weight > TOLERANCES['norm']:
        u = (cu * v + cw * w) / math.sqrt(weight)
    else:
        u = v.copy()
    # u⊥ completes u inside the block
    perp = np.vdot(u, w) * v - np.vdot(u, v) * w
    perp = perp / np.linalg.norm(perp)

    a, b = np.vdot(u, v), np.vdot(perp, v)
    if abs(a) > TOLERANCES['norm']:
        b = b * np.conj(a) / abs(a)
    if abs(b) > TOLERANCES['norm']:
        perp = perp * (b / abs(b))
    alpha = math.atan2(abs(b), abs(a))

    c, d = np.vdot(u, q), np.vdot(perp, q)
    if abs(c) > TOLERANCES['norm']:
        d = d * np.conj(c) / abs(c)
    elif abs(d) > 0:
        d = abs(d)
    beta_abs = math.atan2(abs(d), abs(c))
    beta = beta_abs if d.real >= 0 else -beta_abs
    q_form = np.array([math.cos(beta), math.sin(beta)])
    residual = float(np.linalg.norm(np.outer([abs(c), d], np.conj([abs(c), d])) - np.outer(q_form, q_form)))

    overlap = min(1.0, abs(np.vdot(v, q)))
    return JordanBlock(weight, _fold(alpha), _fold(beta), (u, perp), 2, math.acos(overlap), residual)


def _one_dim_block(e: np.ndarray, q0: int, q1: int, psi: np.ndarray) -> JordanBlock:
    alpha = 0.0 if q0 else math.pi / 2
    beta = 0.0 if q1 else math.pi / 2
    weight = float(abs(np.vdot(e, psi)) ** 2)
    return JordanBlock(weight, alpha, beta, (e,), 1, abs(alpha - beta))


def jordan_decompose(Q0: np.ndarray, Q1: np.ndarray, psi: np.ndarray) -> JordanReport:
    """Split the space into ≤2-dimensional blocks stabilized by both projectors."""
    Q0, Q1, psi = _validate_inputs(Q0, Q1, psi)
    dim = psi.shape[0]
    eye = np.eye(dim)
    V0, _ = _range_basis(Q0)

    blocks: List[JordanBlock] = []
    rec0 = np.zeros((dim, dim), dtype=complex)
    rec1 = np.zeros((dim, dim), dtype=complex)
    covered = np.zeros((dim, dim), dtype=complex)

    if V0.shape[1]:
        _, E = np.linalg.eigh(V0.conj().T @ Q1 @ V0)
        for k in range(E.shape[1]):
            v = V0 @ E[:, k]
            v = v / np.linalg.norm(v)
            q1v = Q1 @ v
            inside, outside = np.linalg.norm(q1v), np.linalg.norm(v - q1v)
            pv = np.outer(v, v.conj())
            if outside < _SPLIT_TOL or inside < _SPLIT_TOL:
                q1 = int(outside < _SPLIT_TOL)
                blocks.append(_one_dim_block(v, 1, q1, psi))
                rec0 += pv
                rec1 += q1 * pv
                covered += pv
                continue
            w = q1v - np.vdot(v, q1v) * v
            w = w / np.linalg.norm(w)
            q = q1v / inside
            blocks.append(_two_dim_block(v, q, w, psi))
            rec0 += pv
            rec1 += np.outer(q, q.conj())
            covered += pv + np.outer(w, w.conj())

    # the rest lies in ker Q0 and is Q1-invariant
    vals, vecs = np.linalg.eigh(eye - covered)
    rest = vecs[:, vals > 0.5]
    if rest.shape[1]:
        k_vals, k_vecs = np.linalg.eigh(rest.conj().T @ Q1 @ rest)
        for k in range(k_vecs.shape[1]):
            e = rest @ k_vecs[:, k]
            e = e / np.linalg.norm(e)
            q1 = int(k_vals[k] > 0.5)
            blocks.append(_one_dim_block(e, 0, q1, psi))
            rec1 += q1 * np.outer(e, e.conj())

    recon = max(np.linalg.norm(Q0 - rec0), np.linalg.norm(Q1 - rec1))
    p0 = sum(b.weight * math.cos(b.alpha) ** 2 for b in blocks)
    p1 = sum(b.weight * math.cos(b.beta) ** 2 for b in blocks)
    p_xor = sum(b.weight * b.p_xor for b in blocks)
    delta = abs(p_xor - 0.5)
    report = JordanReport(
        blocks=blocks,
        p0=p0,
        p1=p1,
        p_xor=p_xor,
        delta=delta,
        quantum_slack=OMEGA_QUANTUM + delta - (p0 + p1) / 2,
        classical_diag=all(b.dim == 1 for b in blocks),
        reconstruction_error=float(recon),
        dim=dim,
    )
    if recon > TOLERANCES['jordan']:
        logger.warning(f"Jordan reconstruction error {recon:.3e} exceeds tolerance")
    return report


def success_probabilities(Q0: np.ndarray, Q1: np.ndarray, psi: np.ndarray) -> Tuple[float, float]:
    """Direct p_m = ‖Q_m ψ‖²."""
    Q0, Q1, psi = _validate_inputs(Q0, Q1, psi)
    return float(np.linalg.norm(Q0 @ psi) ** 2), float(np.linalg.norm(Q1 @ psi) ** 2)


def parity_success(Q0: np.ndarray, Q1: np.ndarray, psi: np.ndarray) -> float:
    """‖(Q1Q0 + (I−Q1)(I−Q0))ψ‖²."""
    Q0, Q1, psi = _validate_inputs(Q0, Q1, psi)
    eye = np.eye(psi.shape[0])
    op = Q1 @ Q0 + (eye - Q1) @ (eye - Q0)
    return float(np.linalg.norm(op @ psi) ** 2)


@dataclass(frozen=True)
class SoundnessVerdict:
    quantum_slack: float
    classical_slack: Optional[float]
    tight: bool

    def to_dict(self) -> Dict:
        return {'quantum_slack': self.quantum_slack, 'classical_slack': self.classical_slack,
                'tight': self.tight}


def soundness_check(report: JordanReport) -> SoundnessVerdict:
    """Slack in (p0+p1)/2 ≤ cos²(π/8) + δ, and in the classical bound 3/4 + δ/2 for diagonal devices."""
    success = (report.p0 + report.p1) / 2
    quantum_slack = OMEGA_QUANTUM + report.delta - success
    classical_slack = None
    if report.classical_diag:
        classical_slack = OMEGA_CLASSICAL + report.delta / 2 - success
    if quantum_slack < -TOLERANCES['slack']:
        logger.error(f"Quantum soundness bound violated by {-quantum_slack:.3e}")
    return SoundnessVerdict(quantum_slack, classical_slack, quantum_slack <= TOLERANCES['slack'])


# -- qubit test --------------------------------------------------------------

def observables(Q0: np.ndarray, Q1: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """S_m = 2Q_m − I."""
    eye = np.eye(Q0.shape[0], dtype=Q0.dtype)
    return 2 * Q0 - eye, 2 * Q1 - eye


def anticommutator(S0: np.ndarray, S1: np.ndarray) -> np.ndarray:
    return S0 @ S1 + S1 @ S0


def expectation(op: np.ndarray, psi: np.ndarray):
    """⟨ψ|op|ψ⟩; keeps the dtype, so exact rationals stay exact."""
    return psi.conj() @ (op @ psi)


@dataclass(frozen=True)
class AnticommutatorResult:
    dense: float
    closed_form: float

    @property
    def discrepancy(self) -> float:
        return abs(self.dense - self.closed_form)


def anticommutator_expectation(Q0: np.ndarray, Q1: np.ndarray, psi: np.ndarray,
                               report: Optional[JordanReport] = None) -> AnticommutatorResult:
    """⟨ψ|{S0,S1}²|ψ⟩ densely, and per block as Σ t_i·4cos²(2θ_i)."""
    Q0, Q1, psi = _validate_inputs(Q0, Q1, psi)
    S0, S1 = observables(Q0, Q1)
    A = anticommutator(S0, S1)
    dense = float(expectation(A @ A, psi).real)
    report = report or jordan_decompose(Q0, Q1, psi)
    closed = sum(b.weight * 4 * math.cos(2 * b.theta) ** 2 for b in report.blocks)
    return AnticommutatorResult(dense, float(closed))


def deviation_moments(report: JordanReport) -> Dict[str, float]:
    """Weighted distance of the blocks from the optimal (±π/8, ∓π/8) configuration."""
    m1 = m2 = offgrid = offset = 0.0
    for b in report.blocks:
        alpha, beta = _fold(b.alpha), _fold(b.beta)
        m1 += b.weight * (abs(alpha - beta) - math.pi / 4) ** 2
        m2 += b.weight * (alpha + beta) ** 2
        offset += b.weight * min(abs(alpha - math.pi / 8), abs(alpha + math.pi / 8))
        if not (-GRID_EDGE <= alpha <= GRID_EDGE and -GRID_EDGE <= beta <= GRID_EDGE):
            offgrid += b.weight
    return {'m1': m1, 'm2': m2, 'offgrid': offgrid, 'alpha_offset': offset}


def claim_bounds(report: JordanReport) -> Dict[str, float]:
    """Intermediate quantities of the qubit-test argument, each an upper bound on the next-but-one."""
    on_grid = 0.0
    weighted_gap = 0.0
    for b in report.blocks:
        alpha, beta = _fold(b.alpha), _fold(b.beta)
        weighted_gap += b.weight * abs(b.p_xor - 0.5)
        if -GRID_EDGE <= alpha <= GRID_EDGE and -GRID_EDGE <= beta <= GRID_EDGE:
            on_grid += b.weight * math.cos((alpha - beta) / 2) ** 2
    moments = deviation_moments(report)
    return {
        'success': report.success,
        'offgrid_weight': moments['offgrid'],
        'concavity_bound': on_grid,
        'weighted_parity_gap': weighted_gap,
        'sqrt_bound': 0.5 + 0.5 * math.sqrt(max(0.0, report.p_xor)),
    }


# -- trigonometric inequalities ----------------------------------------------

def main_inequality_slack(alpha, beta):
    """|2cos²(α−β) − 1| + 2cos²(π/8) − cos²α − cos²β."""
    alpha, beta = np.asarray(alpha), np.asarray(beta)
    return (np.abs(2 * np.cos(alpha - beta) ** 2 - 1) + 2 * OMEGA_QUANTUM
            - np.cos(alpha) ** 2 - np.cos(beta) ** 2)


def offgrid_inequality_slack(alpha, beta):
    """cos²(α−β) − 1/2 − 100((cos²α + cos²β)/2 − 0.851)."""
    alpha, beta = np.asarray(alpha), np.asarray(beta)
    return (np.cos(alpha - beta) ** 2 - 0.5
            - 100 * ((np.cos(alpha) ** 2 + np.cos(beta) ** 2) / 2 - 0.851))


@dataclass(frozen=True)
class TrigScanResult:
    grid_side: int
    min_slack_main: float
    argmin_main: Tuple[float, float]
    min_slack_ine2: float
    argmin_ine2: Tuple[float, float]

    def to_dict(self) -> Dict:
        return {'grid_side': self.grid_side, 'min_slack_main': self.min_slack_main,
                'argmin_main': list(self.argmin_main), 'min_slack_ine2': self.min_slack_ine2,
                'argmin_ine2': list(self.argmin_ine2)}


def trig_scan(grid_points: int) -> TrigScanResult:
    """Minimum slack of both inequalities over a uniform grid of about grid_points points."""
    if grid_points < 1000:
        raise ValidationError("trig_scan needs at least 10³ grid points")
    side = int(math.ceil(math.sqrt(grid_points)))
    angles = np.linspace(0.0, 2 * math.pi, side)
    A, B = np.meshgrid(angles, angles, indexing='ij')
    main = main_inequality_slack(A, B)
    i, j = np.unravel_index(int(np.argmin(main)), main.shape)

    half = side // 2
    alphas = np.concatenate([np.linspace(-math.pi / 2, -GRID_EDGE, half),
                             np.linspace(GRID_EDGE, math.pi / 2, side - half)])
    A2, B2 = np.meshgrid(alphas, angles, indexing='ij')
    ine2 = offgrid_inequality_slack(A2, B2)
    k, l = np.unravel_index(int(np.argmin(ine2)), ine2.shape)
    return TrigScanResult(
        grid_side=side,
        min_slack_main=float(main[i, j]),
        argmin_main=(float(angles[i]), float(angles[j])),
        min_slack_ine2=float(ine2[k, l]),
        argmin_ine2=(float(alphas[k]), float(angles[l])),
    )


# -- devices for sweeps ------------------------------------------------------

def ray_projector(theta: float) -> np.ndarray:
    v = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    return np.outer(v, v.conj())


def canonical_device(alpha: float = math.pi / 8, beta: float = -math.pi / 8) -> Device:
    """One 2-dim block with ψ = |0⟩, Q0 = |α⟩⟨α|, Q1 = |β⟩⟨β|."""
    return Device(np.array([1, 0], dtype=complex), ray_projector(alpha), ray_projector(beta))


def random_projector(rng: np.random.Generator, dim: int, rank: int, real: bool = True) -> np.ndarray:
    g = rng.standard_normal((dim, dim))
    if not real:
        g = g + 1j * rng.standard_normal((dim, dim))
    basis, _ = np.linalg.qr(g)
    v = basis[:, :rank]
    proj = v @ v.conj().T
    return ((proj + proj.conj().T) / 2).astype(complex)


def random_state(rng: np.random.Generator, dim: int, real: bool = True) -> np.ndarray:
    psi = rng.standard_normal(dim).astype(complex)
    if not real:
        psi = psi + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_device(rng: np.random.Generator, dim: int, real: bool = True) -> Device:
    """Random state and projectors of uniformly drawn ranks."""
    r0 = int(rng.integers(0, dim + 1))
    r1 = int(rng.integers(0, dim + 1))
    return Device(random_state(rng, dim, real), random_projector(rng, dim, r0, real),
                  random_projector(rng, dim, r1, real))


def diagonal_device(rng: np.random.Generator, dim: int) -> Device:
    """Commuting 0/1-diagonal projectors, i.e. a classical device."""
    d0 = rng.integers(0, 2, size=dim)
    d1 = rng.integers(0, 2, size=dim)
    return Device(random_state(rng, dim), np.diag(d0).astype(complex), np.diag(d1).astype(complex))


def qubit_test_trend(eps_values: Sequence[float]) -> Dict:
    """Anti-commutator of one-block devices at success cos²(π/8) − ε along β = −α."""
    rows = []
    for eps in sorted(eps_values):
        if not 0 < eps < OMEGA_QUANTUM:
            raise ValidationError(f"ε must lie in (0, cos²(π/8)), got {eps}")
        alpha = math.acos(math.sqrt(OMEGA_QUANTUM - eps))
        device = canonical_device(alpha, -alpha)
        result = anticommutator_expectation(device.proj0, device.proj1, device.state)
        rows.append({'epsilon': eps, 'alpha': alpha, 'anticommutator': result.dense,
                     'ratio': result.dense / eps})
    values = [r['anticommutator'] for r in rows]
    return {
        'rows': rows,
        'fitted_constant': max(r['ratio'] for r in rows) if rows else 0.0,
        'monotone': all(a <= b + TOLERANCES['jordan'] for a, b in zip(values, values[1:])),
    }
