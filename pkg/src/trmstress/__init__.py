"""Stress generation and physics-informed super-resolution for two-phase random materials."""
__version__ = "0.1.0"
