"""
Two-phase protocol template.

Phase A is a free-form exchange driven by the verifier until it emits a flag.
On cont, Phase B sends one uniformly random challenge bit m and accepts the
reply b iff (-1)^b equals the verifier's prediction ĉ_m.
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from qkit.core.rng import random_bit
from qkit.error_handler import ProtocolViolationError, ValidationError

logger = logging.getLogger(__name__)

VERIFIER = 'verifier'
PROVER = 'prover'
MAX_PHASE_A_ROUNDS = 16


class Flag(Enum):
    ACC = "acc"
    REJ = "rej"
    CONT = "cont"


class ProtocolId(Enum):
    KCVY = "kcvy"
    SIMPLIFIED = "simplified"
    KLVY_CHSH = "klvy_chsh"


Message = Dict[str, Any]


@dataclass
class Transcript:
    """Classical record of an execution. verifier_rand is kept out of messages."""
    protocol: ProtocolId
    messages: List[Tuple[str, Message]] = field(default_factory=list)
    verifier_rand: Dict[str, Any] = field(default_factory=dict)

    def record(self, sender: str, payload: Message):
        if self.messages and self.messages[-1][0] == sender:
            raise ProtocolViolationError(sender, "sent two messages in a row")
        if not self.messages and sender != VERIFIER:
            raise ProtocolViolationError(sender, "spoke before the verifier")
        self.messages.append((sender, payload))

    def payloads(self, sender: Optional[str] = None) -> List[Message]:
        return [p for s, p in self.messages if sender is None or s == sender]


@dataclass(frozen=True)
class PhaseBRecord:
    m: int
    b: int
    c_hat: int
    accepted: bool


@dataclass
class ExecutionResult:
    flag: Flag
    transcript: Transcript
    phase_b: Optional[PhaseBRecord] = None
    c_hat0: Optional[int] = None
    c_hat1: Optional[int] = None
    reason: Optional[str] = None
    tags: Dict[str, Any] = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        if self.flag == Flag.CONT:
            return self.phase_b.accepted
        return self.flag == Flag.ACC

    def to_record(self, seed: int, trial: int) -> Dict[str, Any]:
        """JSONL line for the transcript file."""
        pb = self.phase_b
        return {
            'protocol': self.transcript.protocol.value,
            'seed': int(seed),
            'trial': int(trial),
            'flag': self.flag.value,
            'messages': [[sender, payload] for sender, payload in self.transcript.messages],
            'm': pb.m if pb else None,
            'b': pb.b if pb else None,
            'c_hat0': self.c_hat0,
            'c_hat1': self.c_hat1,
            'accepted': self.accepted,
        }


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


class VerifierRole(ABC):
    """Phase-A state machine. step(None) yields the opening message."""
    protocol: ProtocolId

    def __init__(self):
        self.reason: Optional[str] = None
        self.tags: Dict[str, Any] = {}

    @abstractmethod
    def step(self, incoming: Optional[Message], rng: np.random.Generator) -> Union[Message, Flag]:
        ...

    @abstractmethod
    def c_hat(self, m: int) -> int:
        """Correct ±1 answer for challenge m; only valid after cont."""

    @abstractmethod
    def rand_record(self) -> Dict[str, Any]:
        ...

    def reject(self, reason: str) -> Flag:
        self.reason = reason
        logger.info(f"Verifier rejected: {reason}",
                    extra={'qkit_protocol': self.protocol.value, 'qkit_reason': reason})
        return Flag.REJ


class ProverRole(ABC):
    protocol: ProtocolId

    @abstractmethod
    def respond(self, message: Message) -> Message:
        ...


def decide(c_hat: int, b: int) -> bool:
    """(-1)^b == ĉ."""
    if c_hat not in (-1, 1) or isinstance(c_hat, bool):
        raise ValidationError(f"ĉ must be ±1, got {c_hat!r}")
    if b not in (0, 1) or isinstance(b, bool):
        raise ValidationError(f"b must be a bit, got {b!r}")
    return (1 - 2 * b) == c_hat


def expect(message: Any, kind: str, sender: str, *fields: str) -> Message:
    """Check a payload's type tag and required fields."""
    if not isinstance(message, dict) or message.get('type') != kind:
        got = message.get('type') if isinstance(message, dict) else type(message).__name__
        raise ProtocolViolationError(sender, f"expected {kind!r} message, got {got!r}")
    missing = [f for f in fields if f not in message]
    if missing:
        raise ProtocolViolationError(sender, f"{kind!r} message lacks {missing}")
    return message


def expect_bit(message: Message, name: str, sender: str) -> int:
    value = message.get(name)
    if isinstance(value, bool) or value not in (0, 1):
        raise ProtocolViolationError(sender, f"{name!r} must be 0 or 1, got {value!r}")
    return int(value)


def run_protocol(verifier: VerifierRole, prover: ProverRole, rng: np.random.Generator) -> ExecutionResult:
    """Drive one execution; rng is the verifier's private stream."""
    if verifier.protocol != prover.protocol:
        raise ValidationError(
            f"Protocol mismatch: verifier {verifier.protocol.value}, prover {prover.protocol.value}")

    transcript = Transcript(verifier.protocol)
    try:
        return _execute(verifier, prover, rng, transcript)
    except ProtocolViolationError as e:
        # the harness records the partial exchange as a rejection
        e.transcript = transcript
        raise


def _execute(verifier: VerifierRole, prover: ProverRole, rng: np.random.Generator,
             transcript: Transcript) -> ExecutionResult:
    incoming: Optional[Message] = None
    for _ in range(MAX_PHASE_A_ROUNDS):
        outgoing = verifier.step(incoming, rng)
        if isinstance(outgoing, Flag):
            flag = outgoing
            break
        transcript.record(VERIFIER, outgoing)
        incoming = prover.respond(outgoing)
        if not isinstance(incoming, dict):
            raise ProtocolViolationError(PROVER, "reply is not a JSON object")
        transcript.record(PROVER, incoming)
    else:
        raise ProtocolViolationError(VERIFIER, "Phase A did not terminate")

    transcript.verifier_rand = verifier.rand_record()
    if flag != Flag.CONT:
        return ExecutionResult(flag, transcript, reason=verifier.reason, tags=dict(verifier.tags))

    c_hat0, c_hat1 = verifier.c_hat(0), verifier.c_hat(1)
    m = random_bit(rng)
    challenge = {'type': 'challenge', 'm': m}
    transcript.record(VERIFIER, challenge)
    reply = prover.respond(challenge)
    b = expect_bit(expect(reply, 'response', PROVER, 'b'), 'b', PROVER)
    transcript.record(PROVER, reply)

    c_hat = c_hat0 if m == 0 else c_hat1
    record = PhaseBRecord(m=m, b=b, c_hat=c_hat, accepted=decide(c_hat, b))
    return ExecutionResult(flag, transcript, record, c_hat0, c_hat1, tags=dict(verifier.tags))
