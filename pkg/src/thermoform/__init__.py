"""Thermodynamic formalism for hyperbolic meromorphic maps of finite order."""

__version__ = "0.1.0"
