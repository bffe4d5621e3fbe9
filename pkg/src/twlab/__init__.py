"""Soft-edge random matrix laboratory."""
__version__ = "0.1.0"
