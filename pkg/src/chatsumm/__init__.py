"""Hybrid chat transcript summarization engine."""

__version__ = "0.1.0"
