"""Brownian last passage percolation: geodesics, multi-path maxima, line ensembles and polymer events."""
__version__ = "0.1.0"
