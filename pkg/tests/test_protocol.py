import pytest

from qkit.core.protocol import (
    MAX_PHASE_A_ROUNDS,
    PROVER,
    VERIFIER,
    Flag,
    ProtocolId,
    ProverRole,
    Transcript,
    VerifierRole,
    canonical_json,
    decide,
    expect,
    expect_bit,
    run_protocol,
)
from qkit.core.rng import derive_stream
from qkit.error_handler import ProtocolViolationError, ValidationError


class EchoVerifier(VerifierRole):
    """One Phase-A round, then cont with fixed predictions."""
    protocol = ProtocolId.SIMPLIFIED

    def __init__(self, flag=Flag.CONT, rounds=1):
        super().__init__()
        self.flag = flag
        self.rounds = rounds
        self.seen = 0

    def step(self, incoming, rng):
        if incoming is not None:
            expect(incoming, 'pong', PROVER)
            self.seen += 1
        if self.seen >= self.rounds:
            return self.flag
        return {'type': 'ping'}

    def c_hat(self, m):
        return 1 if m == 0 else -1

    def rand_record(self):
        return {'rounds': self.rounds}


class ScriptedProver(ProverRole):
    protocol = ProtocolId.SIMPLIFIED

    def __init__(self, b=0, reply=None):
        self.b = b
        self.reply = reply

    def respond(self, message):
        if message['type'] == 'challenge':
            self.m = message['m']
            return {'type': 'response', 'b': self.b if self.b is not None else self.m}
        return self.reply if self.reply is not None else {'type': 'pong'}


def test_decide():
    assert decide(1, 0)
    assert decide(-1, 1)
    assert not decide(1, 1)
    assert not decide(-1, 0)
    for c, b in ((0, 0), (1, 2), (True, 0), (1, False)):
        with pytest.raises(ValidationError):
            decide(c, b)


def test_transcript_order_enforced():
    t = Transcript(ProtocolId.KCVY)
    with pytest.raises(ProtocolViolationError) as info:
        t.record(PROVER, {'type': 'y'})
    assert info.value.sender == PROVER
    t.record(VERIFIER, {'type': 'key'})
    with pytest.raises(ProtocolViolationError):
        t.record(VERIFIER, {'type': 'key'})
    t.record(PROVER, {'type': 'y'})
    assert t.payloads(PROVER) == [{'type': 'y'}]


def test_run_protocol_phase_b():
    # b = m answers (+1, -1) correctly for both challenges
    for seed in range(20):
        result = run_protocol(EchoVerifier(), ScriptedProver(b=None), derive_stream(seed))
        assert result.flag == Flag.CONT
        assert result.accepted
        assert result.phase_b.c_hat == (1 if result.phase_b.m == 0 else -1)
        assert [s for s, _ in result.transcript.messages] == [VERIFIER, PROVER, VERIFIER, PROVER]
        assert result.transcript.verifier_rand == {'rounds': 1}


def test_constant_answer_wins_half_the_challenges():
    accepted = [run_protocol(EchoVerifier(), ScriptedProver(b=0), derive_stream(s)).accepted
                for s in range(400)]
    assert 0.4 < sum(accepted) / len(accepted) < 0.6


def test_phase_a_flags_skip_phase_b():
    result = run_protocol(EchoVerifier(Flag.ACC), ScriptedProver(), derive_stream(0))
    assert result.accepted and result.phase_b is None
    result = run_protocol(EchoVerifier(Flag.REJ), ScriptedProver(), derive_stream(0))
    assert not result.accepted


def test_record_layout():
    result = run_protocol(EchoVerifier(), ScriptedProver(b=0), derive_stream(3))
    record = result.to_record(seed=3, trial=9)
    assert record['protocol'] == 'simplified'
    assert (record['seed'], record['trial']) == (3, 9)
    assert record['flag'] == 'cont'
    assert record['messages'][0] == ['verifier', {'type': 'ping'}]
    assert (record['c_hat0'], record['c_hat1']) == (1, -1)
    assert record['b'] == 0


def test_violation_carries_partial_transcript():
    with pytest.raises(ProtocolViolationError) as info:
        run_protocol(EchoVerifier(), ScriptedProver(reply={'type': 'garbage'}), derive_stream(0))
    assert info.value.sender == PROVER
    assert [s for s, _ in info.value.transcript.messages] == [VERIFIER, PROVER]


def test_non_object_reply_is_violation():
    with pytest.raises(ProtocolViolationError):
        run_protocol(EchoVerifier(), ScriptedProver(reply=['pong']), derive_stream(0))


def test_bad_response_bit_is_violation():
    with pytest.raises(ProtocolViolationError):
        run_protocol(EchoVerifier(), ScriptedProver(b=2), derive_stream(0))


def test_phase_a_round_limit():
    with pytest.raises(ProtocolViolationError) as info:
        run_protocol(EchoVerifier(rounds=MAX_PHASE_A_ROUNDS + 1), ScriptedProver(), derive_stream(0))
    assert info.value.sender == VERIFIER


def test_protocol_mismatch():
    prover = ScriptedProver()
    prover.protocol = ProtocolId.KLVY_CHSH
    with pytest.raises(ValidationError):
        run_protocol(EchoVerifier(), prover, derive_stream(0))


def test_expect_helpers():
    msg = {'type': 'd', 'd': 1, 'flag': True}
    assert expect(msg, 'd', PROVER, 'd') is msg
    with pytest.raises(ProtocolViolationError):
        expect(msg, 'y', PROVER)
    with pytest.raises(ProtocolViolationError):
        expect(msg, 'd', PROVER, 'missing')
    assert expect_bit(msg, 'd', PROVER) == 1
    with pytest.raises(ProtocolViolationError):
        expect_bit(msg, 'flag', PROVER)


def test_canonical_json_is_stable():
    assert canonical_json({'b': 1, 'a': [1, {'z': 0, 'y': None}]}) == '{"a":[1,{"y":null,"z":0}],"b":1}'
