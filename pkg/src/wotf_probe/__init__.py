"""Lensless weak-phase imaging with learned and physics-based phase retrieval."""

__version__ = "0.1.0"
