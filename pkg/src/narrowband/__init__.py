"""Narrow-band bilinear multipliers: symbols, pairings, norm probes and scaling fits."""

__version__ = "0.1.0"
