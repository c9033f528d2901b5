"""Coherent DP-16QAM simulation with low-complexity IQ-skew monitoring."""

__version__ = "0.1.0"
