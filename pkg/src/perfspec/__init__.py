"""Spectral computations for perforated periodic media with waveguides."""
from __future__ import annotations

__version__ = "0.1.0"

from .geometry import CellSpec, GridSpec, StripSpec, WindowSpec  # noqa: E402
from .operator import BlochParameter, assemble  # noqa: E402
from .eigensolve import SolverOptions, dense_reference, smallest_eigenpairs  # noqa: E402

__all__ = [
    "__version__",
    "BlochParameter",
    "CellSpec",
    "GridSpec",
    "SolverOptions",
    "StripSpec",
    "WindowSpec",
    "assemble",
    "dense_reference",
    "smallest_eigenpairs",
]
