"""
Device analysis reports.

Jordan blocks of a replayed device go to a pandas frame and a CSV, the
soundness slacks and self-test figures to a JSON report.
"""

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd

from qkit.core import analysis
from qkit.core.provers import Device, correct_projectors

logger = logging.getLogger(__name__)


@dataclass
class DeviceAnalysis:
    c_hat: tuple
    report: analysis.JordanReport
    soundness: analysis.SoundnessVerdict
    anticommutator: analysis.AnticommutatorResult
    moments: Dict[str, float]
    bounds: Dict[str, float]
    parity_direct: float

    def to_dict(self) -> Dict:
        return {
            'c_hat': list(self.c_hat),
            'jordan': self.report.to_dict(),
            'soundness': self.soundness.to_dict(),
            'anticommutator': {'dense': self.anticommutator.dense,
                               'closed_form': self.anticommutator.closed_form},
            'deviation_moments': self.moments,
            'claim_bounds': self.bounds,
            'parity_success_direct': self.parity_direct,
        }


def analyze_device(device: Device, c_hat0: int = 1, c_hat1: int = 1) -> DeviceAnalysis:
    """Jordan report, soundness slack, anti-commutator and moments for one ĉ assignment."""
    Q0, Q1 = correct_projectors(device, c_hat0, c_hat1)
    report = analysis.jordan_decompose(Q0, Q1, device.state)
    result = DeviceAnalysis(
        c_hat=(c_hat0, c_hat1),
        report=report,
        soundness=analysis.soundness_check(report),
        anticommutator=analysis.anticommutator_expectation(Q0, Q1, device.state, report),
        moments=analysis.deviation_moments(report),
        bounds=analysis.claim_bounds(report),
        parity_direct=analysis.parity_success(Q0, Q1, device.state),
    )
    logger.info(f"Device of dimension {device.dim}: {len(report.blocks)} blocks, "
                f"success {report.success:.6f}, quantum slack {result.soundness.quantum_slack:.3e}")
    return result


def blocks_frame(report: analysis.JordanReport) -> pd.DataFrame:
    """One row per Jordan block."""
    return pd.DataFrame([b.to_row() for b in report.blocks],
                        columns=['t', 'alpha', 'beta', 'dim', 'theta', 'form_residual'])


def write_json(payload: Dict, path: Union[str, Path]):
    try:
        os.makedirs(os.path.dirname(str(path)) or '.', exist_ok=True)
        payload = dict(payload, generated_at=datetime.now().isoformat())
        with open(path, 'w') as f:
            json.dump(payload, f, indent=2)
    except OSError as e:
        logger.error(f"Error writing report {path}: {str(e)}")
        raise


def write_device_report(result: DeviceAnalysis, json_path: Optional[Union[str, Path]] = None,
                        csv_path: Optional[Union[str, Path]] = None):
    if json_path:
        write_json(result.to_dict(), json_path)
    if csv_path:
        try:
            os.makedirs(os.path.dirname(str(csv_path)) or '.', exist_ok=True)
            blocks_frame(result.report).to_csv(csv_path, index=False)
        except OSError as e:
            logger.error(f"Error writing block table {csv_path}: {str(e)}")
            raise


def trend_frame(trend: Dict) -> pd.DataFrame:
    return pd.DataFrame(trend['rows'], columns=['epsilon', 'alpha', 'anticommutator', 'ratio'])
