"""Stress-energy tensor diagnostics for the system Delta u - W_u(u) = 0."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
