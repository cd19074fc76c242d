"""Helicity, Maxwell and Yang-Mills-Poisson numerics on a periodic cube."""
from .lattice import TorusGrid

__version__ = "0.1.0"
__all__ = ["TorusGrid", "__version__"]
