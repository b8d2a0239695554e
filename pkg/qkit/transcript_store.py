import json
import logging
import os
import threading
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

from qkit.core.protocol import ExecutionResult, canonical_json
from qkit.error_handler import ProtocolViolationError


def execution_record(result: ExecutionResult, seed: int, trial: int) -> Dict[str, Any]:
    """Transcript line plus the verifier's private record, kept outside the message list."""
    record = result.to_record(seed, trial)
    record['verifier_rand'] = result.transcript.verifier_rand
    if result.reason is not None:
        record['reason'] = result.reason
    return record


def violation_record(error: ProtocolViolationError, protocol: str, seed: int, trial: int) -> Dict[str, Any]:
    """rej line for an execution aborted by a malformed message."""
    transcript = error.transcript
    return {
        'protocol': protocol,
        'seed': int(seed),
        'trial': int(trial),
        'flag': 'rej',
        'messages': [[s, p] for s, p in transcript.messages] if transcript else [],
        'm': None,
        'b': None,
        'c_hat0': None,
        'c_hat1': None,
        'accepted': False,
        'verifier_rand': transcript.verifier_rand if transcript else {},
        'reason': 'protocol_violation',
        'violation': {'sender': error.sender, 'detail': error.detail},
    }


class TranscriptStore:
    """Append-only JSONL writer; one canonical JSON object per execution."""

    def __init__(self, path: Optional[Union[str, Path]]):
        self.path = Path(path) if path else None
        self.logger = logging.getLogger(__name__)
        self._lock = threading.Lock()
        self._handle = None
        self.count = 0

    def __enter__(self) -> 'TranscriptStore':
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def open(self):
        if self.path is None or self._handle is not None:
            return
        try:
            os.makedirs(self.path.parent or '.', exist_ok=True)
            self._handle = open(self.path, 'w', encoding='utf-8', newline='\n')
        except OSError as e:
            self.logger.error(f"Error opening transcript file {self.path}: {str(e)}")
            raise

    def append(self, record: Dict[str, Any]):
        with self._lock:
            self.count += 1
            if self._handle is None:
                return
            self._handle.write(canonical_json(record) + '\n')

    def close(self):
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None


def iter_transcripts(path: Union[str, Path]) -> Iterator[Dict[str, Any]]:
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                logging.getLogger(__name__).error(f"Bad transcript line {lineno} in {path}: {str(e)}")
                raise


def load_transcripts(path: Union[str, Path]) -> List[Dict[str, Any]]:
    return list(iter_transcripts(path))
