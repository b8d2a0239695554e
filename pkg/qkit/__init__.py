"""
qkit: classical verification of quantum provers, by simulation.
"""

__version__ = "0.1.0"
