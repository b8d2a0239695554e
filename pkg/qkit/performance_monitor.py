import logging
import statistics
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from qkit.config import DEFAULTS


class MetricType(Enum):
    SUCCESS_RATE = "success_rate"
    EQUATION_RATE = "equation_rate"
    PREIMAGE_RATE = "preimage_rate"
    CHALLENGE_BALANCE = "challenge_balance"
    BRANCH_BALANCE = "branch_balance"


def wilson_interval(successes: int, trials: int, confidence: float = None) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    confidence = DEFAULTS['confidence'] if confidence is None else confidence
    if trials <= 0:
        return 0.0, 1.0
    z = statistics.NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * ((phat * (1 - phat) / trials + z * z / (4 * trials * trials)) ** 0.5) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class RateCounter:
    hits: int = 0
    total: int = 0

    def add(self, hit: bool):
        self.total += 1
        self.hits += int(hit)

    @property
    def rate(self) -> Optional[float]:
        return self.hits / self.total if self.total else None


@dataclass
class RunSummary:
    protocol: str
    prover: str
    trials: int
    accepts: int
    flag_counts: Dict[str, int]
    success_rate: float
    wilson_interval: Tuple[float, float]
    branch_rates: Dict[str, Optional[float]] = field(default_factory=dict)
    branch_counts: Dict[str, int] = field(default_factory=dict)
    challenge_zero_fraction: Optional[float] = None
    reasons: Dict[str, int] = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    def to_dict(self) -> Dict:
        out = asdict(self)
        out['wilson_interval'] = list(self.wilson_interval)
        return out


class PerformanceMonitor:
    """Accumulates per-execution outcomes and summarizes a run."""

    def __init__(self, protocol: str, prover: str, confidence: float = None):
        self.protocol = protocol
        self.prover = prover
        self.confidence = DEFAULTS['confidence'] if confidence is None else confidence
        self.logger = logging.getLogger(__name__)
        self.overall = RateCounter()
        self.branches: Dict[str, RateCounter] = {}
        self.flag_counts: Dict[str, int] = {'acc': 0, 'rej': 0, 'cont': 0}
        self.reasons: Dict[str, int] = {}
        self.challenges = RateCounter()
        self.benchmarks: Dict[str, Dict[str, float]] = {}
        self._started = time.perf_counter()

    def record(self, flag: str, accepted: bool, m: Optional[int] = None,
               branch: Optional[str] = None, reason: Optional[str] = None):
        """Record one execution."""
        self.overall.add(accepted)
        self.flag_counts[flag] = self.flag_counts.get(flag, 0) + 1
        if m is not None:
            self.challenges.add(m == 0)
        if branch is not None:
            self.branches.setdefault(branch, RateCounter()).add(accepted)
        if reason is not None:
            self.reasons[reason] = self.reasons.get(reason, 0) + 1

    def set_benchmark(self, metric_type: MetricType, min_value: float, max_value: float):
        self.benchmarks[metric_type.value] = {'min': min_value, 'max': max_value}

    def _check_benchmarks(self, summary: RunSummary):
        """Warn when an observed rate leaves its benchmark range."""
        observed = {
            MetricType.SUCCESS_RATE.value: summary.success_rate,
            MetricType.CHALLENGE_BALANCE.value: summary.challenge_zero_fraction,
        }
        branched = sum(summary.branch_counts.values())
        if branched:
            observed[MetricType.BRANCH_BALANCE.value] = summary.branch_counts.get('preimage', 0) / branched
        for branch, rate in summary.branch_rates.items():
            observed[f"{branch}_rate"] = rate
        for name, bench in self.benchmarks.items():
            value = observed.get(name)
            if value is None:
                continue
            if value < bench['min'] or value > bench['max']:
                self.logger.warning(
                    f"Performance alert: {name} = {value:.6f} "
                    f"outside benchmark range [{bench['min']}, {bench['max']}]"
                )

    def summary(self) -> RunSummary:
        trials = self.overall.total
        accepts = self.overall.hits
        rate = accepts / trials if trials else 0.0
        result = RunSummary(
            protocol=self.protocol,
            prover=self.prover,
            trials=trials,
            accepts=accepts,
            flag_counts=dict(self.flag_counts),
            success_rate=rate,
            wilson_interval=wilson_interval(accepts, trials, self.confidence),
            branch_rates={b: c.rate for b, c in sorted(self.branches.items())},
            branch_counts={b: c.total for b, c in sorted(self.branches.items())},
            challenge_zero_fraction=self.challenges.rate,
            reasons=dict(sorted(self.reasons.items())),
            elapsed_seconds=time.perf_counter() - self._started,
        )
        self._check_benchmarks(result)
        return result

    def trials_per_second(self) -> float:
        elapsed = time.perf_counter() - self._started
        return self.overall.total / elapsed if elapsed > 0 else 0.0

