"""
Seeded Monte-Carlo execution of protocol runs.

Each trial draws its verifier and prover streams from (seed, trial), so the
transcript file is a pure function of the configuration whatever the worker
count or transport.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, validator

from qkit.config import DEFAULTS, OMEGA_CLASSICAL, OMEGA_QUANTUM
from qkit.core.protocol import Flag, ProtocolId, ProverRole, VerifierRole, run_protocol
from qkit.core.protocol_suite import make_verifier
from qkit.core.provers import PROVER_KINDS, Device, DeviceProver, make_prover
from qkit.core.rng import derive_stream
from qkit.core.tcf import TcfFamily
from qkit.error_handler import ProtocolViolationError, ValidationError
from qkit.performance_monitor import MetricType, PerformanceMonitor, RunSummary
from qkit.transcript_store import TranscriptStore, execution_record, violation_record

logger = logging.getLogger(__name__)

SEED_BOUND = 1 << 64
BALANCE_MIN_TRIALS = 1000
RATE_SIGMAS = 5


class RunConfig(BaseModel):
    """One Monte-Carlo run."""
    protocol: str
    prover: str
    tcf: str = DEFAULTS['tcf']
    n_bits: int = DEFAULTS['n_bits']
    trials: int = DEFAULTS['trials']
    seed: int
    output_path: Optional[str] = None
    workers: int = DEFAULTS['workers']
    c_hat: Optional[Tuple[int, int]] = None
    confidence: float = DEFAULTS['confidence']

    @validator('protocol')
    def validate_protocol(cls, v):
        return ProtocolId(v).value

    @validator('tcf')
    def validate_tcf(cls, v):
        return TcfFamily(v).value

    @validator('prover')
    def validate_prover(cls, v):
        if v in PROVER_KINDS or v.endswith('.json'):
            return v
        raise ValueError(f"prover must be one of {sorted(PROVER_KINDS)} or a device .json file")

    @validator('n_bits')
    def validate_n_bits(cls, v):
        if v < 2:
            raise ValueError('n_bits must be at least 2')
        return v

    @validator('trials', 'workers')
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError('must be at least 1')
        return v

    @validator('seed')
    def validate_seed(cls, v):
        if not 0 <= v < SEED_BOUND:
            raise ValueError('seed must be an unsigned 64-bit integer')
        return v

    @validator('c_hat')
    def validate_c_hat(cls, v):
        if v is None:
            return v
        if any(c not in (-1, 1) for c in v):
            raise ValueError('ĉ entries must be ±1')
        return v

    @validator('confidence')
    def validate_confidence(cls, v):
        if not 0 < v < 1:
            raise ValueError('confidence must lie in (0, 1)')
        return v

    @property
    def device_replay(self) -> bool:
        return self.prover not in PROVER_KINDS


def build_config(**kwargs) -> RunConfig:
    """RunConfig with pydantic failures surfaced as ValidationError."""
    try:
        config = RunConfig(**kwargs)
    except Exception as e:
        raise ValidationError(f"Invalid run configuration: {e}") from e
    if config.device_replay and config.c_hat is None:
        raise ValidationError("Device replay needs a ĉ assignment (--c-hat)")
    if not config.device_replay and config.c_hat is not None:
        raise ValidationError("--c-hat only applies to device replay")
    return config


class FixedCHatVerifier(VerifierRole):
    """Skips Phase A and predicts a fixed ĉ pair; drives device replays."""

    def __init__(self, protocol: Union[ProtocolId, str], c_hat0: int, c_hat1: int):
        super().__init__()
        self.protocol = ProtocolId(protocol)
        self._c_hat = (c_hat0, c_hat1)

    def step(self, incoming, rng):
        return Flag.CONT

    def c_hat(self, m: int) -> int:
        return self._c_hat[m]

    def rand_record(self) -> Dict[str, Any]:
        return {'c_hat': list(self._c_hat)}


def make_roles(config: RunConfig, trial: int, device: Optional[Device] = None,
               prover: Optional[ProverRole] = None) -> Tuple[VerifierRole, ProverRole, np.random.Generator]:
    """Verifier, prover and the verifier's stream for one trial."""
    verifier_rng = derive_stream(config.seed, trial, 'verifier')
    if device is not None:
        verifier = FixedCHatVerifier(config.protocol, *config.c_hat)
    else:
        verifier = make_verifier(config.protocol, config.tcf, config.n_bits)
    if prover is None:
        prover_rng = derive_stream(config.seed, trial, 'prover')
        if device is not None:
            prover = DeviceProver(device, config.protocol, prover_rng)
        else:
            prover = make_prover(config.prover, config.protocol, prover_rng)
    return verifier, prover, verifier_rng


def run_trial(config: RunConfig, trial: int, device: Optional[Device] = None,
              prover: Optional[ProverRole] = None) -> Tuple[Dict[str, Any], Optional[Dict[str, Any]]]:
    """Execute one trial; returns its transcript record and monitor tags."""
    verifier, prover, rng = make_roles(config, trial, device, prover)
    try:
        result = run_protocol(verifier, prover, rng)
    except ProtocolViolationError as e:
        logger.error(f"Protocol violation in trial {trial}: {e}",
                     extra={'qkit_trial': trial, 'qkit_sender': e.sender})
        return violation_record(e, config.protocol, config.seed, trial), None
    return execution_record(result, config.seed, trial), dict(result.tags)


def observe_record(monitor: PerformanceMonitor, record: Dict[str, Any], tags: Optional[Dict[str, Any]]):
    monitor.record(record['flag'], record['accepted'], record['m'],
                   branch=(tags or {}).get('branch'), reason=record.get('reason'))


def iter_trials(config: RunConfig, device: Optional[Device] = None) -> Iterator[Tuple[Dict, Optional[Dict]]]:
    """Trial results in trial order, computed by a worker pool."""
    if config.workers == 1:
        for trial in range(config.trials):
            yield run_trial(config, trial, device)
        return
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        yield from pool.map(lambda t: run_trial(config, t, device), range(config.trials),
                            chunksize=max(1, config.trials // (4 * config.workers)))


def load_device(config: RunConfig) -> Optional[Device]:
    if not config.device_replay:
        return None
    if not os.path.exists(config.prover):
        raise ValidationError(f"Device file not found: {config.prover}")
    return Device.load(config.prover)


def expected_rates(protocol: str, prover: str) -> Dict[MetricType, float]:
    """Analytic acceptance rates of the built-in provers; none for device replay."""
    if prover not in ('honest', 'classical'):
        return {}
    omega = OMEGA_QUANTUM if prover == 'honest' else OMEGA_CLASSICAL
    if protocol == ProtocolId.KCVY.value:
        return {MetricType.SUCCESS_RATE: (1 + omega) / 2,
                MetricType.EQUATION_RATE: omega,
                MetricType.PREIMAGE_RATE: 1.0}
    return {MetricType.SUCCESS_RATE: omega}


def rate_benchmarks(protocol: str, prover: str, trials: int) -> Dict[MetricType, Tuple[float, float]]:
    """RATE_SIGMAS-wide bands around the expected rates; branch rates see about half the trials."""
    bands = {}
    for metric, p in expected_rates(protocol, prover).items():
        n = trials if metric == MetricType.SUCCESS_RATE else trials // 2
        half = RATE_SIGMAS * (p * (1 - p) / max(n, 1)) ** 0.5
        bands[metric] = (max(0.0, p - half), min(1.0, p + half))
    return bands


def cli_run(config: RunConfig) -> RunSummary:
    """Run all trials, stream transcripts to disk through one writer and summarize."""
    device = load_device(config)
    prover_name = 'device' if device is not None else config.prover
    monitor = PerformanceMonitor(config.protocol, prover_name, config.confidence)
    if config.trials >= BALANCE_MIN_TRIALS:
        # fair-coin bounds on the verifier's challenge and branch draws
        monitor.set_benchmark(MetricType.CHALLENGE_BALANCE, 0.45, 0.55)
        if config.protocol == ProtocolId.KCVY.value:
            monitor.set_benchmark(MetricType.BRANCH_BALANCE, 0.45, 0.55)
        for metric, (low, high) in rate_benchmarks(config.protocol, prover_name, config.trials).items():
            monitor.set_benchmark(metric, low, high)
    logger.info(f"Starting {config.trials} {config.protocol} trials with {prover_name} prover",
                extra={'qkit_protocol': config.protocol, 'qkit_seed': config.seed})

    with TranscriptStore(config.output_path) as store:
        for record, tags in iter_trials(config, device):
            store.append(record)
            observe_record(monitor, record, tags)

    summary = monitor.summary()
    logger.info(f"Finished: {summary.accepts}/{summary.trials} accepted "
                f"({summary.success_rate:.6f}, {summary.elapsed_seconds:.1f}s, "
                f"{monitor.trials_per_second():.0f} trials/s)")
    return summary


def summarize_records(records: List[Dict[str, Any]], protocol: str, prover: str,
                      confidence: float = None) -> RunSummary:
    """RunSummary from stored transcript lines."""
    monitor = PerformanceMonitor(protocol, prover, confidence)
    for record in records:
        branch = None
        if record['protocol'] == ProtocolId.KCVY.value:
            branch = next((p.get('value') for s, p in record['messages'] if p.get('type') == 'branch'), None)
        monitor.record(record['flag'], record['accepted'], record['m'], branch=branch,
                       reason=record.get('reason'))
    return monitor.summary()
