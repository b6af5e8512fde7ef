"""Occupation-measure LP relaxations for variational and optimal-control problems."""

__version__ = "0.1.0"
