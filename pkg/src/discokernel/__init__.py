"""Quantum sentence kernels on compositional (DisCoCat) circuits."""

__version__ = "0.1.0"
