"""Stationary geodesic nets on chart-atlas Riemannian manifolds.

Compute, verify, regularize, and continue stationary geodesic nets: weighted
multigraphs mapped to a manifold with geodesic edges whose multiplicity-
weighted inward unit tangents balance at every vertex.
"""

__version__ = "0.1.0"

from . import riemann  # noqa: F401
from .errors import GeonetsError, NumericalError, ValidationError  # noqa: F401
