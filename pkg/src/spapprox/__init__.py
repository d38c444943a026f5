"""Approximation characteristics of S^p spaces of functions of several variables."""

__version__ = "0.1.0"
