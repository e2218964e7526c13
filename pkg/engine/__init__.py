"""Directional initial-access simulator for mm-Wave cellular links."""

__version__ = "0.1.0"
