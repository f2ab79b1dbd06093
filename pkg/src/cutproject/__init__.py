"""Numerical laboratory for cut-and-project sets."""

__version__ = "0.1.0"
