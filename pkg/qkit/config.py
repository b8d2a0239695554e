"""
Configuration settings for the qkit test-of-quantumness toolkit
"""

import logging
import math
import os

from dotenv import load_dotenv
from pythonjsonlogger import jsonlogger

# Load environment variables
load_dotenv()

# Toolkit identity
TOOLKIT_NAME = "qkit"
TOOLKIT_TITLE = "Test-of-quantumness protocol toolkit"

# Reference success probabilities
OMEGA_QUANTUM = math.cos(math.pi / 8) ** 2
OMEGA_CLASSICAL = 0.75

# Honest Phase-B measurement angles, indexed by challenge bit
HONEST_ANGLES = {
    0: math.pi / 8,
    1: -math.pi / 8,
}

# Numerical tolerances
TOLERANCES = {
    'norm': 1e-12,
    'norm_loose': 1e-10,
    'projector': 1e-10,
    'prune': 1e-14,
    'jordan': 1e-9,
    'unitary': 1e-9,
    'slack': 1e-9,
}

# Resource limits
LIMITS = {
    'rabin_max_bits': 1024,
    'device_max_dim': 64,
    'dense_max_qubits': 12,
    'certify_max_bits': 3,
    'certify_max_tables': 1 << 22,
}

# Wire transport
TRANSPORT = {
    'default_timeout': float(os.getenv('QKIT_TIMEOUT', '10')),
    'max_frame_bytes': 1 << 20,
    'default_port': 7878,
}

# Process exit codes
EXIT_CODES = {
    'ok': 0,
    'validation': 2,
    'protocol_violation': 3,
    'io': 4,
}

# RunConfig defaults
DEFAULTS = {
    'tcf': 'toy',
    'n_bits': 4,
    'trials': 1000,
    'workers': 1,
    'confidence': 0.99,
}

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_logging_configured = False


def setup_logging(level: str = None, fmt: str = None) -> logging.Logger:
    """Configure the package logger once from QKIT_LOG / QKIT_LOG_FORMAT."""
    global _logging_configured
    logger = logging.getLogger(TOOLKIT_NAME)
    if _logging_configured:
        return logger

    level = (level or os.getenv('QKIT_LOG', 'INFO')).upper()
    fmt = (fmt or os.getenv('QKIT_LOG_FORMAT', 'text')).lower()

    handler = logging.StreamHandler()
    if fmt == 'json':
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    logger.addHandler(handler)
    logger.setLevel(getattr(logging, level, logging.INFO))
    logger.propagate = False
    _logging_configured = True
    return logger
