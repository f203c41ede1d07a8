"""Achievable rate regions and lattice-scheme simulation for the doubly dirty
Gaussian multiple-access channel with estimated transmitter side information."""
from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
__version__ = "0.1.0"
