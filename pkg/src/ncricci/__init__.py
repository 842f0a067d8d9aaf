"""Ricci curvature of curved noncommutative two-tori."""
from .algebra import AlgebraContext, MatrixElement, TorusElement

__all__ = ["AlgebraContext", "MatrixElement", "TorusElement"]
__version__ = "0.1.0"
