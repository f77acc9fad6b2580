"""Reflected radial random walks and reflected Bessel diffusions.

Exact dynamic programming for the radial walk on ``{m0, ..., N}``, Monte-Carlo
for the d-dimensional sphere walk and the reflected Bessel SDE on ``(0, 1]``,
and eigenfunction series for the interval Neumann/Dirichlet kernels.
"""

from rbessel.errors import DomainError

__version__ = "0.1.0"

__all__ = ["DomainError", "__version__"]
