"""Pseudospectral simulator and blow-up certificates for the Geng-Xue system."""

__version__ = "0.1.0"
