import logging

import pytest

from qkit.config import OMEGA_CLASSICAL, OMEGA_QUANTUM
from qkit.core import analysis
from qkit.error_handler import ValidationError
from qkit.harness import runner
from qkit.performance_monitor import MetricType
from qkit.transcript_store import load_transcripts


def _config(**overrides):
    fields = dict(protocol='simplified', prover='honest', n_bits=3, trials=200, seed=42)
    fields.update(overrides)
    return runner.build_config(**fields)


def _rate_near(summary, p, sigmas=4):
    sigma = (p * (1 - p) / summary.trials) ** 0.5
    return abs(summary.success_rate - p) <= sigmas * sigma


def test_run_writes_one_line_per_trial(tmp_path):
    path = tmp_path / 'runs.jsonl'
    summary = runner.cli_run(_config(output_path=str(path), trials=50))
    records = load_transcripts(path)
    assert [r['trial'] for r in records] == list(range(50))
    assert all(r['seed'] == 42 and r['protocol'] == 'simplified' for r in records)
    assert summary.trials == 50
    assert summary.accepts == sum(r['accepted'] for r in records)
    assert summary.flag_counts['cont'] == 50


def test_worker_count_does_not_change_output(tmp_path):
    one, four = tmp_path / 'one.jsonl', tmp_path / 'four.jsonl'
    runner.cli_run(_config(protocol='kcvy', output_path=str(one), trials=120))
    runner.cli_run(_config(protocol='kcvy', output_path=str(four), trials=120, workers=4))
    assert one.read_bytes() == four.read_bytes()


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / 'a.jsonl', tmp_path / 'b.jsonl'
    runner.cli_run(_config(output_path=str(a), trials=20))
    runner.cli_run(_config(output_path=str(b), trials=20, seed=43))
    assert a.read_bytes() != b.read_bytes()


def test_kcvy_preimage_branch_always_accepts():
    summary = runner.cli_run(_config(protocol='kcvy', trials=400))
    assert summary.branch_rates['preimage'] == 1.0
    assert set(summary.branch_counts) == {'preimage', 'equation'}
    assert summary.flag_counts['acc'] == summary.branch_counts['preimage']


def test_summarize_records_matches_run(tmp_path):
    path = tmp_path / 'kcvy.jsonl'
    summary = runner.cli_run(_config(protocol='kcvy', output_path=str(path), trials=150))
    again = runner.summarize_records(load_transcripts(path), 'kcvy', 'honest')
    assert again.accepts == summary.accepts
    assert again.branch_counts == summary.branch_counts
    assert again.flag_counts == summary.flag_counts


@pytest.mark.parametrize('overrides', [
    dict(protocol='bb84'),
    dict(prover='magic'),
    dict(tcf='lwe'),
    dict(n_bits=1),
    dict(trials=0),
    dict(workers=0),
    dict(seed=-1),
    dict(seed=1 << 64),
    dict(confidence=1.0),
    dict(c_hat=(1, 1)),
    dict(prover='device.json'),
    dict(prover='device.json', c_hat=(1, 0)),
])
def test_build_config_errors(overrides):
    with pytest.raises(ValidationError):
        _config(**overrides)


def test_missing_device_file(tmp_path):
    config = _config(prover=str(tmp_path / 'absent.json'), c_hat=(1, 1))
    with pytest.raises(ValidationError):
        runner.cli_run(config)


def test_device_replay(tmp_path):
    path = tmp_path / 'canonical.json'
    analysis.canonical_device().save(path)
    out = tmp_path / 'replay.jsonl'
    summary = runner.cli_run(_config(prover=str(path), c_hat=(1, 1), trials=2000, output_path=str(out)))
    assert summary.prover == 'device'
    assert _rate_near(summary, OMEGA_QUANTUM)
    first = load_transcripts(out)[0]
    assert first['verifier_rand'] == {'c_hat': [1, 1]}
    assert first['c_hat0'] == 1 and first['c_hat1'] == 1


@pytest.mark.slow
@pytest.mark.parametrize('protocol, prover, low, high', [
    ('simplified', 'honest', 0.8486, 0.8586),
    ('simplified', 'classical', 0.745, 0.755),
    ('klvy_chsh', 'honest', 0.8486, 0.8586),
    ('klvy_chsh', 'classical', 0.745, 0.755),
])
def test_large_runs(protocol, prover, low, high):
    summary = runner.cli_run(_config(protocol=protocol, prover=prover, n_bits=4, trials=100_000, workers=4))
    assert low <= summary.success_rate <= high
    lo, hi = summary.wilson_interval
    assert lo <= summary.success_rate <= hi
    assert 0.49 <= summary.challenge_zero_fraction <= 0.51


@pytest.mark.slow
def test_large_kcvy_run():
    summary = runner.cli_run(_config(protocol='kcvy', n_bits=4, trials=110_000, workers=4))
    assert summary.branch_counts['equation'] >= 50_000
    assert summary.branch_rates['preimage'] == 1.0
    assert abs(summary.branch_rates['equation'] - OMEGA_QUANTUM) <= 0.005

def test_small_runs_bracket_the_bounds():
    honest = runner.cli_run(_config(trials=3000))
    classical = runner.cli_run(_config(prover='classical', trials=3000))
    assert _rate_near(honest, OMEGA_QUANTUM)
    assert _rate_near(classical, OMEGA_CLASSICAL)


def test_expected_rates():
    assert runner.expected_rates('simplified', 'honest') == {MetricType.SUCCESS_RATE: OMEGA_QUANTUM}
    assert runner.expected_rates('klvy_chsh', 'classical') == {MetricType.SUCCESS_RATE: OMEGA_CLASSICAL}
    kcvy = runner.expected_rates('kcvy', 'classical')
    assert kcvy[MetricType.EQUATION_RATE] == OMEGA_CLASSICAL
    assert kcvy[MetricType.PREIMAGE_RATE] == 1.0
    assert kcvy[MetricType.SUCCESS_RATE] == pytest.approx(0.875)
    assert runner.expected_rates('simplified', 'device') == {}


def test_rate_benchmarks_bands():
    bands = runner.rate_benchmarks('kcvy', 'honest', 10_000)
    low, high = bands[MetricType.EQUATION_RATE]
    half = runner.RATE_SIGMAS * (OMEGA_QUANTUM * (1 - OMEGA_QUANTUM) / 5000) ** 0.5
    assert low == pytest.approx(OMEGA_QUANTUM - half)
    assert high == pytest.approx(OMEGA_QUANTUM + half)
    assert bands[MetricType.PREIMAGE_RATE] == (1.0, 1.0)
    assert bands[MetricType.SUCCESS_RATE][0] < (1 + OMEGA_QUANTUM) / 2 < bands[MetricType.SUCCESS_RATE][1]


def _alerts(caplog):
    return [r.getMessage() for r in caplog.records if 'Performance alert' in r.getMessage()]


def test_honest_kcvy_run_stays_inside_rate_benchmarks(caplog):
    with caplog.at_level(logging.WARNING, logger='qkit.performance_monitor'):
        runner.cli_run(_config(protocol='kcvy', trials=4000))
    assert _alerts(caplog) == []


def test_run_below_its_expected_rate_raises_alert(caplog, monkeypatch):
    monkeypatch.setattr(runner, 'expected_rates',
                        lambda protocol, prover: {MetricType.SUCCESS_RATE: OMEGA_QUANTUM})
    with caplog.at_level(logging.WARNING, logger='qkit.performance_monitor'):
        runner.cli_run(_config(prover='classical', trials=2000))
    assert any('success_rate' in m for m in _alerts(caplog))


@pytest.mark.slow
def test_honest_runs_cover_the_quantum_value_across_seeds():
    covered = 0
    for seed in range(100):
        lo, hi = runner.cli_run(_config(trials=1000, seed=seed, confidence=0.99)).wilson_interval
        covered += lo <= OMEGA_QUANTUM <= hi
    assert covered >= 95
