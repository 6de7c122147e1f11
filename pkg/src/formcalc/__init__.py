"""Exterior calculus on truncated Hilbert-Schmidt forms with Gaussian measures."""

__version__ = "0.1.0"
