"""Numerical verification toolkit for the conformal integral equation on the Heisenberg group."""

__version__ = "0.1.0"
