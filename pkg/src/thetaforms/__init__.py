"""Theta functions with characteristics, the vector-valued modular forms built
from their gradients, and the E8 lattice counts used to show non-vanishing."""

__version__ = "0.1.0"
