"""Numerical laboratory for slightly subcritical blow-up with residual mass."""

__version__ = "0.1.0"
