import os
import socket
import struct
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest

from qkit.core.protocol import VERIFIER
from qkit.error_handler import TransportError, ValidationError
from qkit.harness import runner, transport


def _config(**overrides):
    fields = dict(protocol='kcvy', prover='honest', n_bits=3, trials=25, seed=7)
    fields.update(overrides)
    return runner.build_config(**fields)


class _Server:
    """VerifierServer on an ephemeral port, served from a background thread."""

    def __init__(self, config):
        self.server = transport.VerifierServer('127.0.0.1:0')
        self.addr = '{}:{}'.format(*self.server.address)
        self.result = None
        self.error = None
        self.thread = threading.Thread(target=self._run, args=(config,), daemon=True)
        self.thread.start()

    def _run(self, config):
        try:
            self.result = self.server.serve(config, accept_timeout=10)
        except Exception as e:
            self.error = e

    def join(self):
        self.thread.join(timeout=30)
        assert not self.thread.is_alive()


@pytest.mark.parametrize('protocol', ['kcvy', 'simplified', 'klvy_chsh'])
def test_remote_session_matches_in_process_run(tmp_path, protocol):
    local, remote = tmp_path / 'local.jsonl', tmp_path / 'remote.jsonl'
    runner.cli_run(_config(protocol=protocol, output_path=str(local)))

    server = _Server(_config(protocol=protocol, output_path=str(remote)))
    session = transport.connect_prover(server.addr, protocol, 'honest', seed=7, timeout=10)
    server.join()

    assert server.error is None
    assert server.result.trials == 25
    assert session.trials == 25
    assert session.accepts == server.result.accepts
    assert remote.read_bytes() == local.read_bytes()


def test_malformed_frame_is_recorded_as_violation(tmp_path):
    out = tmp_path / 'remote.jsonl'
    server = _Server(_config(protocol='simplified', output_path=str(out)))
    host, port = transport.parse_address(server.addr)
    sock = socket.create_connection((host, port), timeout=10)
    conn = transport.FramedConnection(sock, VERIFIER, timeout=10)
    conn.send({'frame': 'hello', 'protocol': 'simplified', 'prover': 'raw'})
    assert conn.expect('hello')['trials'] == 25
    assert conn.expect('trial')['trial'] == 0
    assert conn.expect('msg')['payload']['type'] == 'key'
    sock.sendall(struct.pack('>I', 2 ** 31))
    server.join()
    conn.close()

    assert server.error is None
    assert server.result.trials == 1
    assert server.result.reasons == {'protocol_violation': 1}
    line = out.read_text().splitlines()
    assert len(line) == 1
    assert '"violation":{"detail":"frame length 2147483648 exceeds limit","sender":"prover"}' in line[0]


def test_protocol_mismatch_ends_session():
    server = _Server(_config(protocol='kcvy'))
    with pytest.raises(ValidationError):
        transport.connect_prover(server.addr, 'simplified', 'honest', seed=7, timeout=10)
    server.join()
    assert isinstance(server.error, ValidationError)


def test_device_replay_is_in_process_only(tmp_path):
    server = transport.VerifierServer('127.0.0.1:0')
    config = _config(prover=str(tmp_path / 'dev.json'), c_hat=(1, 1))
    with pytest.raises(ValidationError):
        server.serve(config)
    server.listener.close()


@pytest.mark.parametrize('addr', ['localhost', 'host:port', '1.2.3.4:'])
def test_parse_address_errors(addr):
    with pytest.raises(ValidationError):
        transport.parse_address(addr)


def test_parse_address_defaults_host():
    assert transport.parse_address(':9000') == ('127.0.0.1', 9000)


def test_encode_frame_prefix():
    frame = transport.encode_frame({'frame': 'bye'})
    assert frame[:4] == struct.pack('>I', len(frame) - 4)
    assert frame[4:] == b'{"frame":"bye"}'


def _free_port():
    with socket.socket() as s:
        s.bind(('127.0.0.1', 0))
        return s.getsockname()[1]


def test_serve_verifier_on_fixed_port():
    addr = f"127.0.0.1:{_free_port()}"
    results = []
    thread = threading.Thread(
        target=lambda: results.append(transport.serve_verifier(addr, _config(protocol='simplified'), 10)),
        daemon=True)
    thread.start()
    for _ in range(100):
        try:
            session = transport.connect_prover(addr, 'simplified', 'classical', seed=7, timeout=10)
            break
        except TransportError:
            time.sleep(0.05)
    else:
        pytest.fail('verifier never started listening')
    thread.join(timeout=30)
    assert session.trials == 25
    assert results[0].accepts == session.accepts
    assert results[0].prover == 'classical'


@pytest.mark.slow
@pytest.mark.parametrize('protocol', ['kcvy', 'simplified', 'klvy_chsh'])
def test_separate_process_session_matches_in_process_run(tmp_path, protocol):
    local, remote = tmp_path / 'local.jsonl', tmp_path / 'remote.jsonl'
    runner.cli_run(_config(protocol=protocol, trials=1000, output_path=str(local)))

    root = Path(__file__).resolve().parents[1]
    addr = f"127.0.0.1:{_free_port()}"
    log_path = tmp_path / 'serve.log'
    with open(log_path, 'wb') as log:
        server = subprocess.Popen(
            [sys.executable, '-m', 'qkit', 'serve', '--listen', addr, '--accept-timeout', '60',
             '--protocol', protocol, '--n-bits', '3', '--trials', '1000', '--seed', '7',
             '--output', str(remote)],
            cwd=root, env=dict(os.environ, PYTHONPATH=str(root)),
            stdout=subprocess.DEVNULL, stderr=log)
        try:
            for _ in range(600):
                try:
                    session = transport.connect_prover(addr, protocol, 'honest', seed=7, timeout=30)
                    break
                except TransportError:
                    assert server.poll() is None, log_path.read_text()
                    time.sleep(0.1)
            else:
                pytest.fail('verifier process never started listening')
            server.wait(timeout=120)
        finally:
            if server.poll() is None:
                server.kill()

    assert server.returncode == 0
    assert session.trials == 1000
    assert remote.read_bytes() == local.read_bytes()
