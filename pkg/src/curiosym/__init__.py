"""Curiosity-driven discovery of action symbols in a surrogate tabletop world."""

__version__ = "0.1.0"
