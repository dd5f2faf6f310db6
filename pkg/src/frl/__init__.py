"""Regional fractional Laplacian toolkit: constants, quadrature, operator,
Galerkin solver, Pohozaev-type identity diagnostics and half-line constants."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
