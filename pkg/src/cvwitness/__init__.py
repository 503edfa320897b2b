"""Entanglement witnesses for continuous-variable states from random homodyne settings."""

__version__ = "0.1.0"
