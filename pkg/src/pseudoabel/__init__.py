"""Numerical toolkit for J-series, their Mellin transforms and pseudoabelian integrals."""
__version__ = "0.1.0"
