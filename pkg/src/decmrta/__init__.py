"""Decentralized multi-robot task allocation for deadline-constrained delivery."""

__version__ = "0.1.0"
