"""
Exhaustive search for the best deterministic classical Phase-B strategy.

A classical prover's Phase-B behaviour is a response table view → (b0, b1).
Average success decomposes over views, so the search picks, per view, the
best of the four (b0, b1) rows against the verifier coins consistent with it.
Prover choices made during Phase A (x and d for the TCF protocols, the
answer a for compiled CHSH) are maximized over; verifier coins are averaged.
All sums are exact rationals.

View models:
  ideal   the bit that fixes ĉ0·ĉ1 is hidden from the prover. For the TCF
          protocols this is the inner product with the claw partner, treated
          as an ideal hardcore bit; for compiled CHSH it is the encrypted input.
  leaked  the same bit is part of the view; the ceiling becomes 1.

For KCVY only the equation test is certified: a classical prover that knows
its own preimage always passes the preimage test.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, Union

from qkit.config import LIMITS, OMEGA_CLASSICAL
from qkit.core import tcf
from qkit.core.protocol import ProtocolId, decide
from qkit.core.protocol_suite import klvy_c_hat
from qkit.core.rng import derive_stream, dot
from qkit.error_handler import BudgetExceededError, ValidationError

logger = logging.getLogger(__name__)

VIEWS = ('ideal', 'leaked')
_TABLE_ROWS = tuple(itertools.product((0, 1), repeat=2))

CHatPair = Tuple[int, int]


@dataclass(frozen=True)
class CertifyResult:
    protocol: str
    n_bits: int
    view: str
    max_success: Fraction
    views: int
    rows_checked: int

    @property
    def parity_leaked(self) -> bool:
        return self.max_success > OMEGA_CLASSICAL

    def to_dict(self) -> Dict:
        return {
            'protocol': self.protocol,
            'n_bits': self.n_bits,
            'view': self.view,
            'max_success': float(self.max_success),
            'max_success_exact': f"{self.max_success.numerator}/{self.max_success.denominator}",
            'views': self.views,
            'rows_checked': self.rows_checked,
            'parity_leaked': self.parity_leaked,
        }


class _Search:
    """Best-row evaluation with a running count of rows checked."""

    def __init__(self):
        self.rows = 0
        self.views = 0

    def best_row(self, pairs: Sequence[CHatPair]) -> Fraction:
        """Best (b0, b1) against equally likely ĉ pairs that share one view."""
        self.views += 1
        self.rows += len(_TABLE_ROWS)
        if self.rows > LIMITS['certify_max_tables']:
            raise BudgetExceededError("Response-table enumeration exceeds its budget")
        best = Fraction(0)
        for b0, b1 in _TABLE_ROWS:
            hits = sum(int(decide(c0, b0)) + int(decide(c1, b1)) for c0, c1 in pairs)
            best = max(best, Fraction(hits, 2 * len(pairs)))
        return best

    def over_hidden(self, pairs: List[CHatPair], leaked: bool) -> Fraction:
        if leaked:
            return sum((self.best_row([p]) for p in pairs), Fraction(0)) / len(pairs)
        return self.best_row(pairs)


def _sign(bit: int) -> int:
    return -1 if bit else 1


def equation_pair(alpha: int, known: int, beta: int) -> CHatPair:
    """ĉ pair of the equation-type tests: both (-1)^known when α = 0, else (-1)^(β⊕m)."""
    if alpha == 0:
        return _sign(known), _sign(known)
    return _sign(beta), _sign(beta ^ 1)


def _toy_key(n_bits: int) -> tcf.TcfKey:
    key, _ = tcf.gen(n_bits, tcf.TcfFamily.TOY, derive_stream(0, 0, 'harness'))
    return key


def _tcf_ceiling(protocol: ProtocolId, n_bits: int, leaked: bool, search: _Search) -> Fraction:
    key = _toy_key(n_bits)
    size = 1 << n_bits
    best = Fraction(0)
    for x in range(size):
        delta = x ^ tcf.partner(key, x)
        t = tcf.preimage_type(key, x)
        if protocol == ProtocolId.SIMPLIFIED:
            coins = list(itertools.product(range(size), repeat=2))
        else:
            coins = [(r, r) for r in range(size)]
        total = Fraction(0)
        for r0, r1 in coins:
            # α = 0 forces r0·x0 = r1·x1, which the prover can compute from its own x
            known = dot(r1 if t else r0, x)
            total += max(
                search.over_hidden([equation_pair(known ^ h, known, dot(d, delta)) for h in (0, 1)], leaked)
                for d in range(size)
            )
        best = max(best, total / len(coins))
    return best


def _klvy_ceiling(leaked: bool, search: _Search) -> Fraction:
    return max(
        search.over_hidden([(klvy_c_hat(a, x, 0), klvy_c_hat(a, x, 1)) for x in (0, 1)], leaked)
        for a in (0, 1)
    )


def certify_classical_ceiling(protocol: Union[ProtocolId, str], n_bits: int = 2,
                              view: str = 'ideal') -> CertifyResult:
    """Maximum average success over all deterministic classical strategies."""
    protocol = ProtocolId(protocol)
    if view not in VIEWS:
        raise ValidationError(f"view must be one of {VIEWS}, got {view!r}")
    leaked = view == 'leaked'
    search = _Search()
    if protocol == ProtocolId.KLVY_CHSH:
        max_success = _klvy_ceiling(leaked, search)
    else:
        if not 2 <= n_bits <= LIMITS['certify_max_bits']:
            raise BudgetExceededError(
                f"n_bits must lie in [2, {LIMITS['certify_max_bits']}] for exhaustive enumeration")
        max_success = _tcf_ceiling(protocol, n_bits, leaked, search)

    result = CertifyResult(protocol.value, n_bits, view, max_success, search.views, search.rows)
    level = logging.WARNING if result.parity_leaked else logging.INFO
    logger.log(level, f"Classical ceiling for {protocol.value} ({view} view): {max_success}",
               extra={'qkit_protocol': protocol.value, 'qkit_parity_leaked': result.parity_leaked})
    return result
