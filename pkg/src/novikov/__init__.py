"""Stability zones of plane sections of triply periodic Fermi surfaces."""

__version__ = "0.1.0"
