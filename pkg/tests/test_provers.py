import math
from fractions import Fraction

import numpy as np
import pytest

from qkit.config import OMEGA_QUANTUM
from qkit.core import analysis, mock_qhe, tcf
from qkit.core.protocol import VERIFIER, Flag, ProtocolId, decide, run_protocol
from qkit.core.protocol_suite import (
    BRANCH_PREIMAGE,
    key_message,
    make_verifier,
    simplified_c_hat,
)
from qkit.core.provers import (
    Device,
    DeviceProver,
    HonestQuantumProver,
    OptimalClassicalProver,
    correct_projectors,
    device_phase_b,
    make_prover,
    parity_adversary,
)
from qkit.core.rng import bits_from_wire, bits_to_wire, derive_stream
from qkit.error_handler import ProtocolViolationError, ValidationError


def _acceptance(protocol, prover_cls, trials, n_bits=3, **kwargs):
    results = []
    for trial in range(trials):
        verifier = make_verifier(protocol, 'toy', n_bits)
        prover = prover_cls(protocol, derive_stream(17, trial, 'prover'), **kwargs)
        results.append(run_protocol(verifier, prover, derive_stream(17, trial, 'verifier')))
    return results


def _within(rate, p, trials, sigmas=4):
    return abs(rate - p) <= sigmas * math.sqrt(p * (1 - p) / trials)


@pytest.mark.parametrize('protocol', [ProtocolId.SIMPLIFIED, ProtocolId.KLVY_CHSH])
def test_honest_prover_completeness(protocol):
    results = _acceptance(protocol, HonestQuantumProver, 4000)
    rate = sum(r.accepted for r in results) / len(results)
    assert _within(rate, OMEGA_QUANTUM, len(results))


def test_honest_prover_kcvy_branches():
    results = _acceptance(ProtocolId.KCVY, HonestQuantumProver, 4000)
    preimage = [r for r in results if r.tags['branch'] == BRANCH_PREIMAGE]
    equation = [r for r in results if r.tags['branch'] != BRANCH_PREIMAGE]
    assert preimage and all(r.flag == Flag.ACC for r in preimage)
    rate = sum(r.accepted for r in equation) / len(equation)
    assert _within(rate, OMEGA_QUANTUM, len(equation))


def test_honest_prover_on_rabin():
    results = []
    for trial in range(1500):
        verifier = make_verifier(ProtocolId.SIMPLIFIED, 'rabin', 6)
        prover = HonestQuantumProver(ProtocolId.SIMPLIFIED, derive_stream(3, trial, 'prover'))
        results.append(run_protocol(verifier, prover, derive_stream(3, trial, 'verifier')))
    rate = sum(r.accepted for r in results) / len(results)
    assert _within(rate, OMEGA_QUANTUM, len(results))


def test_global_phase_does_not_change_outcomes():
    plain = _acceptance(ProtocolId.SIMPLIFIED, HonestQuantumProver, 300)
    phased = _acceptance(ProtocolId.SIMPLIFIED, HonestQuantumProver, 300, keep_global_phase=True)
    assert [r.transcript.messages for r in plain] == [r.transcript.messages for r in phased]


@pytest.mark.parametrize('protocol', list(ProtocolId))
def test_classical_prover_three_quarters(protocol):
    results = _acceptance(protocol, OptimalClassicalProver, 4000)
    if protocol == ProtocolId.KCVY:
        results = [r for r in results if r.tags['branch'] != BRANCH_PREIMAGE]
    rate = sum(r.accepted for r in results) / len(results)
    assert _within(rate, 0.75, len(results))


def test_classical_prover_exhaustive_simplified(toy3):
    key, trapdoor = toy3
    n = key.n_bits
    for seed in range(8):
        prover = OptimalClassicalProver(ProtocolId.SIMPLIFIED, derive_stream(seed, 0, 'prover'))
        y = int(prover.respond(key_message(key))['value'])
        claw = tcf.invert(trapdoor, key, y)
        hits = 0
        for r0 in range(1 << n):
            for r1 in range(1 << n):
                reply = prover.respond({'type': 'r', 'r0': bits_to_wire(r0, n), 'r1': bits_to_wire(r1, n)})
                d = bits_from_wire(reply['d'], n)
                for m in (0, 1):
                    c = simplified_c_hat(r0, r1, claw.x0, claw.x1, d, m)
                    hits += decide(c, prover.answer(m))
        assert Fraction(hits, 2 * (1 << 2 * n)) == Fraction(3, 4)


def test_honest_prover_rejects_unknown_message(rng):
    prover = HonestQuantumProver(ProtocolId.SIMPLIFIED, rng)
    with pytest.raises(ProtocolViolationError) as info:
        prover.respond({'type': 'surprise'})
    assert info.value.sender == VERIFIER
    with pytest.raises(ProtocolViolationError):
        prover.respond({'type': 'challenge', 'm': 0})


@pytest.mark.parametrize('prover_cls', [HonestQuantumProver, OptimalClassicalProver])
def test_klvy_provers_reject_malformed_eval_key(prover_cls, rng):
    sk = mock_qhe.keygen(rng)
    ct = mock_qhe.enc(sk, 0, rng).to_dict()
    prover = prover_cls(ProtocolId.KLVY_CHSH, rng)
    with pytest.raises(ProtocolViolationError):
        prover.respond({'type': 'ciphertext', 'ct': ct, 'eval_key': sk.eval_key.hex()[:-2]})


def test_make_prover(rng):
    assert isinstance(make_prover('honest', 'kcvy', rng), HonestQuantumProver)
    assert isinstance(make_prover('classical', 'klvy_chsh', rng), OptimalClassicalProver)
    with pytest.raises(ValidationError):
        make_prover('oracle', 'kcvy', rng)


def test_device_identity_projector(rng):
    device = Device(np.array([0.6, 0.8]), np.eye(2), np.diag([1, 0]))
    assert all(device_phase_b(device, 0, rng)[0] == 0 for _ in range(100))


def test_device_aligned_state(rng):
    device = Device(np.array([1, 0]), np.diag([1, 0]), np.eye(2) / 2 + 0.5 * np.array([[0, 1], [1, 0]]))
    assert all(device_phase_b(device, 0, rng)[0] == 0 for _ in range(100))
    with pytest.raises(ValidationError):
        device_phase_b(device, 2, rng)


def test_device_validation():
    with pytest.raises(ValidationError):
        Device(np.array([1, 0]), np.array([[1, 1], [0, 0]]), np.eye(2))
    with pytest.raises(ValidationError):
        Device(np.array([1, 1]), np.eye(2), np.eye(2))
    with pytest.raises(ValidationError):
        Device(np.array([1, 0]), np.eye(3), np.eye(2))


def test_canonical_device_per_challenge_success():
    rng = derive_stream(8, 0, 'harness')
    device = analysis.canonical_device()
    samples = 20_000
    for m in (0, 1):
        # ĉ = (+1, +1): b = 0 is the accepted outcome for both challenges
        zeros = sum(device_phase_b(device, m, rng)[0] == 0 for _ in range(samples))
        assert _within(zeros / samples, OMEGA_QUANTUM, samples)


def test_parity_adversary_on_identical_measurements(rng):
    proj = analysis.random_projector(rng, 4, 2)
    device = Device(analysis.random_state(rng, 4), proj, proj)
    assert all(parity_adversary(device, 1, 1, rng).correct for _ in range(200))
    assert all(parity_adversary(device, -1, -1, rng).correct for _ in range(200))


def test_parity_adversary_on_canonical_device():
    rng = derive_stream(9, 0, 'harness')
    device = analysis.canonical_device()
    samples = 20_000
    rate = sum(parity_adversary(device, 1, 1, rng).correct for _ in range(samples)) / samples
    assert _within(rate, 0.5, samples)


def test_parity_adversary_matches_dense_formula():
    rng = derive_stream(10, 0, 'harness')
    samples = 3000
    for _ in range(20):
        device = analysis.random_device(rng, int(rng.integers(2, 6)), real=False)
        c0, c1 = (int(c) for c in rng.choice([-1, 1], size=2))
        expected = analysis.parity_success(*correct_projectors(device, c0, c1), device.state)
        rate = sum(parity_adversary(device, c0, c1, rng).correct for _ in range(samples)) / samples
        assert abs(rate - expected) <= 4 * math.sqrt(max(expected * (1 - expected), 1e-4) / samples)


def test_correct_projectors(rng):
    device = analysis.random_device(rng, 3)
    q0, q1 = correct_projectors(device, 1, -1)
    np.testing.assert_allclose(q0, device.proj0)
    np.testing.assert_allclose(q1, np.eye(3) - device.proj1)
    with pytest.raises(ValidationError):
        correct_projectors(device, 0, 1)


def test_device_file_round_trip(tmp_path, rng):
    device = analysis.random_device(rng, 4, real=False)
    path = tmp_path / 'devices' / 'd.json'
    device.save(path)
    loaded = Device.load(path)
    np.testing.assert_allclose(loaded.state, device.state)
    np.testing.assert_allclose(loaded.proj0, device.proj0)
    np.testing.assert_allclose(loaded.proj1, device.proj1)


def test_device_file_shape_checked():
    data = analysis.canonical_device().to_dict()
    data['dim'] = 3
    with pytest.raises(ValidationError):
        Device.from_dict(data)
    data = analysis.canonical_device().to_dict()
    data['proj0'] = data['proj0'][:1]
    with pytest.raises(ValidationError):
        Device.from_dict(data)


def test_device_prover_answers_challenges(rng):
    prover = DeviceProver(analysis.canonical_device(), 'simplified', rng)
    reply = prover.respond({'type': 'challenge', 'm': 1})
    assert reply['type'] == 'response' and reply['b'] in (0, 1)
    with pytest.raises(ProtocolViolationError):
        prover.respond({'type': 'key'})
