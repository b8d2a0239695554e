"""
Verifier and prover in separate processes over TCP.

Every frame is a 4-byte big-endian length followed by that many bytes of
UTF-8 JSON. Session control frames (hello, trial, verdict, bye) wrap the
protocol messages, which travel as {"frame": "msg", "payload": ...}; only
payloads reach the transcript. The seed is never sent: each side derives its
own streams, so a prover started with the same seed reproduces the
in-process transcripts.
"""

import json
import logging
import socket
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from qkit.config import TRANSPORT
from qkit.core.protocol import PROVER, VERIFIER, Message, ProtocolId, ProverRole, canonical_json
from qkit.core.provers import make_prover
from qkit.core.rng import derive_stream
from qkit.error_handler import ProtocolViolationError, TransportError, ValidationError
from qkit.harness.runner import RunConfig, observe_record, run_trial
from qkit.performance_monitor import PerformanceMonitor, RunSummary
from qkit.transcript_store import TranscriptStore

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct('>I')


def parse_address(addr: str) -> Tuple[str, int]:
    host, sep, port = addr.rpartition(':')
    if not sep or not port.isdigit():
        raise ValidationError(f"Address must be host:port, got {addr!r}")
    return host or '127.0.0.1', int(port)


def encode_frame(obj: Dict[str, Any]) -> bytes:
    body = canonical_json(obj).encode('utf-8')
    if len(body) > TRANSPORT['max_frame_bytes']:
        raise ValidationError(f"Frame of {len(body)} bytes exceeds {TRANSPORT['max_frame_bytes']}")
    return _LENGTH.pack(len(body)) + body


class FramedConnection:
    """Length-prefixed JSON frames on a socket; read errors are blamed on the peer."""

    def __init__(self, sock: socket.socket, peer: str, timeout: Optional[float] = None):
        self.sock = sock
        self.peer = peer
        self.sock.settimeout(TRANSPORT['default_timeout'] if timeout is None else timeout)

    def send(self, obj: Dict[str, Any]):
        try:
            self.sock.sendall(encode_frame(obj))
        except OSError as e:
            raise TransportError(f"send to {self.peer} failed: {e}") from e

    def _read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self.sock.recv(remaining)
            except socket.timeout as e:
                raise ProtocolViolationError(self.peer, "timed out") from e
            except OSError as e:
                raise ProtocolViolationError(self.peer, f"connection error: {e}") from e
            if not chunk:
                raise ProtocolViolationError(self.peer, "connection closed mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b''.join(chunks)

    def receive(self) -> Dict[str, Any]:
        (length,) = _LENGTH.unpack(self._read_exact(_LENGTH.size))
        if length > TRANSPORT['max_frame_bytes']:
            raise ProtocolViolationError(self.peer, f"frame length {length} exceeds limit")
        body = self._read_exact(length)
        try:
            frame = json.loads(body.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ProtocolViolationError(self.peer, f"undecodable frame: {e}") from e
        if not isinstance(frame, dict) or 'frame' not in frame:
            raise ProtocolViolationError(self.peer, "frame is not a tagged JSON object")
        return frame

    def expect(self, kind: str) -> Dict[str, Any]:
        frame = self.receive()
        if frame['frame'] != kind:
            raise ProtocolViolationError(self.peer, f"expected {kind!r} frame, got {frame['frame']!r}")
        return frame

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class RemoteProver(ProverRole):
    """Prover role whose replies come from the other end of the connection."""

    def __init__(self, conn: FramedConnection, protocol: ProtocolId):
        self.conn = conn
        self.protocol = protocol

    def respond(self, message: Message) -> Message:
        self.conn.send({'frame': 'msg', 'payload': message})
        frame = self.conn.expect('msg')
        if 'payload' not in frame:
            raise ProtocolViolationError(PROVER, "msg frame lacks a payload")
        return frame['payload']


class VerifierServer:
    """Serves one prover session at a time on a bound port."""

    def __init__(self, listen_addr: str):
        host, port = parse_address(listen_addr)
        try:
            self.listener = socket.create_server((host, port))
        except OSError as e:
            raise TransportError(f"cannot listen on {listen_addr}: {e}") from e
        self.address = self.listener.getsockname()[:2]
        self.logger = logging.getLogger(__name__)

    def serve(self, config: RunConfig, accept_timeout: Optional[float] = None) -> RunSummary:
        if config.device_replay:
            raise ValidationError("Device replay runs in-process only")
        self.listener.settimeout(accept_timeout)
        try:
            sock, peer = self.listener.accept()
        except OSError as e:
            raise TransportError(f"accept failed: {e}") from e
        finally:
            self.listener.close()
        self.logger.info(f"Prover connected from {peer[0]}:{peer[1]}")
        conn = FramedConnection(sock, PROVER)
        try:
            return self._session(conn, config)
        finally:
            conn.close()

    def _session(self, conn: FramedConnection, config: RunConfig) -> RunSummary:
        hello = conn.expect('hello')
        if hello.get('protocol') != config.protocol:
            conn.send({'frame': 'bye', 'error': f"protocol mismatch: serving {config.protocol}"})
            raise ValidationError(f"Prover speaks {hello.get('protocol')!r}, serving {config.protocol!r}")
        conn.send({'frame': 'hello', 'protocol': config.protocol, 'trials': config.trials})

        monitor = PerformanceMonitor(config.protocol, str(hello.get('prover', 'remote')), config.confidence)
        prover = RemoteProver(conn, ProtocolId(config.protocol))
        with TranscriptStore(config.output_path) as store:
            for trial in range(config.trials):
                conn.send({'frame': 'trial', 'trial': trial})
                record, tags = run_trial(config, trial, prover=prover)
                store.append(record)
                observe_record(monitor, record, tags)
                if 'violation' in record:
                    self.logger.error(f"Closing session after violation in trial {trial}")
                    break
                conn.send({'frame': 'verdict', 'trial': trial, 'flag': record['flag'],
                           'accepted': record['accepted']})
            else:
                conn.send({'frame': 'bye'})
        return monitor.summary()


def serve_verifier(listen_addr: str, config: RunConfig, accept_timeout: Optional[float] = None) -> RunSummary:
    return VerifierServer(listen_addr).serve(config, accept_timeout)


@dataclass
class ProverSession:
    trials: int = 0
    accepts: int = 0
    flags: Dict[str, int] = field(default_factory=dict)


def connect_prover(addr: str, protocol: str, prover_kind: str, seed: int,
                   timeout: Optional[float] = None) -> ProverSession:
    """Run the prover side of a session until the verifier says bye."""
    protocol = ProtocolId(protocol)
    host, port = parse_address(addr)
    try:
        sock = socket.create_connection((host, port), timeout=timeout or TRANSPORT['default_timeout'])
    except OSError as e:
        raise TransportError(f"cannot connect to {addr}: {e}") from e
    conn = FramedConnection(sock, VERIFIER, timeout)
    session = ProverSession()
    try:
        conn.send({'frame': 'hello', 'protocol': protocol.value, 'prover': prover_kind})
        prover: Optional[ProverRole] = None
        while True:
            frame = conn.receive()
            kind = frame['frame']
            if kind == 'hello':
                logger.info(f"Session open: {frame.get('trials')} {frame.get('protocol')} trials")
            elif kind == 'trial':
                prover = make_prover(prover_kind, protocol, derive_stream(seed, int(frame['trial']), 'prover'))
            elif kind == 'msg':
                if prover is None:
                    raise ProtocolViolationError(VERIFIER, "protocol message before a trial frame")
                conn.send({'frame': 'msg', 'payload': prover.respond(frame.get('payload'))})
            elif kind == 'verdict':
                session.trials += 1
                session.accepts += int(bool(frame.get('accepted')))
                flag = frame.get('flag')
                session.flags[flag] = session.flags.get(flag, 0) + 1
                prover = None
            elif kind == 'bye':
                if 'error' in frame:
                    raise ValidationError(f"Verifier ended the session: {frame['error']}")
                break
            else:
                raise ProtocolViolationError(VERIFIER, f"unknown frame {kind!r}")
    finally:
        conn.close()
    logger.info(f"Prover session closed: {session.accepts}/{session.trials} accepted")
    return session
