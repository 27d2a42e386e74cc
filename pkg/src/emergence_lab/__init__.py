"""Numerical toolkit for metric orders, emergence of invariant measures,
pseudo-horseshoes and intermediate-value constructions."""

__version__ = "0.1.0"
