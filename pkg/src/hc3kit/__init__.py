"""Numerical toolkit for surface superconductivity onset in 3D domains."""

__version__ = "0.1.0"
