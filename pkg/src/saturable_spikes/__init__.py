"""Semiclassical ground states for saturable Schrodinger-type equations."""

__version__ = "0.1.0"
