"""Exceptional-class classification of one-dimensional non-Hermitian lattice models."""

__version__ = "0.1.0"
