"""Conditioning of 2D Helmholtz boundary-integral operators under Galerkin BEM."""

__version__ = "0.1.0"
