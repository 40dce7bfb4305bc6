"""Weak isomorphism of products of CM elliptic curves, with certificates."""

__version__ = "0.1.0"
