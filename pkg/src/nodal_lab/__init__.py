"""Spectral-geometry lab: nodal domains, inner radii and the inequalities that bound them."""
__version__ = "0.1.0"
