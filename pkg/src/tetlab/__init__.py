"""Numerical laboratory for flight-time statistics of trajectory-equipped theories."""

__version__ = "0.1.0"
