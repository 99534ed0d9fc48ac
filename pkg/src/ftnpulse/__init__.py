"""Minimum-residual-ISI pulse design and simulation for faster-than-Nyquist links."""

__version__ = "0.1.0"
