"""Staged domain-adaptive pre-training laboratory."""

__version__ = "0.1.0"
