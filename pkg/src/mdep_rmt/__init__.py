"""Extreme eigenvalue statistics of m-dependent heavy-tailed random matrices."""

__version__ = "0.1.0"
