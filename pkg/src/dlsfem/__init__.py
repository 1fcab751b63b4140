"""Discontinuous least-squares finite elements for 2D linear elasticity.

The approximation space carries one unknown per element per field component
and is built by constrained least-squares patch reconstruction; the discrete
problem minimizes an L2 residual functional over that space.
"""

__version__ = "0.1.0"
