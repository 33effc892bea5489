"""Identifiability study of the single particle model with electrolyte."""
__version__ = "0.1.0"
