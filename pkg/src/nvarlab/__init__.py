"""Numerical variational laboratory for fractional NLS ground states."""

__version__ = "0.1.0"
