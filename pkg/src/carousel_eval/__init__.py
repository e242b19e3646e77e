"""Offline evaluation of recommendation carousels."""

__version__ = "0.1.0"
