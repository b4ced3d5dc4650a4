"""Gauss-map area and total absolute curvature of surfaces in S^3."""

__version__ = "0.1.0"
