"""Periodicity cell, perforated strip and finite windows, rasterised to node masks.

Node layout: a cell of half-periods ``(l1, l2)`` carries ``n1 = 2*l1/h`` by
``n2 = 2*l2/h`` nodes at local offsets ``-l + j*h``, ``j = 0..n-1``. Masks are
stored as ``active[row, col]`` with rows along x2 and columns along x1, and
unknowns are numbered row-major over active nodes.

In a non-periodic direction the node row at index 0 lies on the outer
boundary and is inactive; the opposite boundary sits at index ``n`` and is
not stored (an implicit Dirichlet row).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SNAP = 1e-9


class GeometryError(ValueError):
    """Raised for inconsistent geometry or grid specifications."""


@dataclass(frozen=True)
class CellSpec:
    l1: float
    l2: float
    hole: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise GeometryError(f"half-periods must be positive, got l1={self.l1}, l2={self.l2}")
        if self.hole is not None:
            a1, b1, a2, b2 = self.hole
            if not (a1 < b1 and a2 < b2):
                raise GeometryError(f"hole {self.hole} is empty")
            if not (-self.l1 < a1 and b1 < self.l1 and -self.l2 < a2 and b2 < self.l2):
                raise GeometryError(
                    f"hole {self.hole} must lie strictly inside (-{self.l1},{self.l1})x(-{self.l2},{self.l2})"
                )

    @property
    def symmetric(self) -> bool:
        """Hole centred so the cell is mirror-symmetric in both axes."""
        if self.hole is None:
            return True
        a1, b1, a2, b2 = self.hole
        return abs(a1 + b1) < _SNAP and abs(a2 + b2) < _SNAP


@dataclass(frozen=True)
class GridSpec:
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise GeometryError(f"grid spacing must be positive, got {self.h}")

    def count(self, length: float) -> int:
        """Number of spacings in ``length``; rejects non-integer ratios."""
        ratio = length / self.h
        n = int(round(ratio))
        if abs(ratio - n) > _SNAP * max(1.0, abs(ratio)):
            raise GeometryError(f"length {length} is not a multiple of h={self.h}")
        return n

    def counts(self, cell: CellSpec) -> tuple[int, int]:
        n1 = self.count(2 * cell.l1)
        n2 = self.count(2 * cell.l2)
        if n1 < 4 or n2 < 4:
            raise GeometryError(f"need at least 4 nodes per cell side, got {n1}x{n2} at h={self.h}")
        return n1, n2

    def hole_nodes(self, cell: CellSpec) -> tuple[int, int, int, int] | None:
        """Inclusive local node ranges ``(i0, i1, j0, j1)`` covering the closed hole."""
        self.counts(cell)
        if cell.hole is None:
            return None
        a1, b1, a2, b2 = cell.hole
        try:
            i0 = self.count(a1 + cell.l1)
            i1 = self.count(b1 + cell.l1)
            j0 = self.count(a2 + cell.l2)
            j1 = self.count(b2 + cell.l2)
        except GeometryError as exc:
            raise GeometryError(f"hole edge not on a grid line: {cell.hole} at h={self.h}") from exc
        return i0, i1, j0, j1


@dataclass(frozen=True)
class StripSpec:
    cell: CellSpec
    J: int
    K: int

    def __post_init__(self):
        if self.J < 1:
            raise GeometryError(f"J must be >= 1, got {self.J}")
        if self.K < 2:
            raise GeometryError(f"K must be >= 2, got {self.K}")

    @property
    def n_cells(self) -> int:
        return 2 * self.K + self.J


@dataclass(frozen=True)
class WindowSpec:
    cell: CellSpec
    columns: tuple[int, int]
    rows: tuple[int, int]
    filled_cells: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        a1, b1 = self.columns
        a2, b2 = self.rows
        if b1 < a1 or b2 < a2:
            raise GeometryError(f"empty window columns={self.columns} rows={self.rows}")
        object.__setattr__(self, "filled_cells", frozenset(tuple(c) for c in self.filled_cells))
        for c1, c2 in self.filled_cells:
            if not (a1 <= c1 <= b1 and a2 <= c2 <= b2):
                raise GeometryError(f"filled cell {(c1, c2)} outside the window")


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Node mask with coordinates. ``x0``/``y0`` are the coordinates of node (0, 0)."""

    active: np.ndarray
    h: float
    x0: float
    y0: float
    wrap1: bool
    wrap2: bool
    neumann_closed: bool = False
    period_cells: tuple[int, int] = (1, 1)

    def __post_init__(self):
        self.active.setflags(write=False)
        if not self.active.any():
            raise GeometryError("mask has no active nodes")

    @property
    def nx(self) -> int:
        return self.active.shape[1]

    @property
    def ny(self) -> int:
        return self.active.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def x1(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def x2(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    def index(self) -> np.ndarray:
        """Row-major unknown numbering; -1 on inactive nodes."""
        idx = np.full(self.active.shape, -1, dtype=np.int64)
        idx[self.active] = np.arange(self.n_active)
        return idx

    def scatter(self, values: np.ndarray, fill=0.0) -> np.ndarray:
        """Place a vector over active nodes onto the full node grid."""
        values = np.asarray(values)
        out = np.full(self.active.shape, fill, dtype=values.dtype)
        out[self.active] = values
        return out

    def same_grid(self, other: "DomainMask") -> bool:
        return (
            self.active.shape == other.active.shape
            and self.h == other.h
            and self.x0 == other.x0
            and self.y0 == other.y0
            and self.wrap1 == other.wrap1
            and self.wrap2 == other.wrap2
            and bool(np.array_equal(self.active, other.active))
        )


def _punch(active: np.ndarray, holes, row0: int, col0: int) -> None:
    if holes is None:
        return
    i0, i1, j0, j1 = holes
    active[row0 + j0 : row0 + j1 + 1, col0 + i0 : col0 + i1 + 1] = False


def build_cell_mask(cell: CellSpec, grid: GridSpec) -> DomainMask:
    """Doubly periodic mask of one cell with the closed hole eliminated."""
    n1, n2 = grid.counts(cell)
    holes = grid.hole_nodes(cell)
    active = np.ones((n2, n1), dtype=bool)
    _punch(active, holes, 0, 0)
    return DomainMask(active, grid.h, -cell.l1, -cell.l2, wrap1=True, wrap2=True)


def build_neumann_cell_mask(cell: CellSpec, grid: GridSpec) -> DomainMask:
    """Closed, non-periodic cell mask ``(n1+1) x (n2+1)`` for the mixed problem.

    Both outer boundary rows and columns are stored and active so that a
    ghost-reflection Neumann closure can be applied on every side.
    """
    n1, n2 = grid.counts(cell)
    holes = grid.hole_nodes(cell)
    active = np.ones((n2 + 1, n1 + 1), dtype=bool)
    _punch(active, holes, 0, 0)
    return DomainMask(active, grid.h, -cell.l1, -cell.l2, wrap1=False, wrap2=False, neumann_closed=True)


def strip_row_offset(strip: StripSpec) -> float:
    """x2 coordinate of the strip's bottom boundary (inclusion block centred on 0)."""
    return -(2 * strip.K + strip.J) * strip.cell.l2


def build_strip_mask(strip: StripSpec, grid: GridSpec) -> DomainMask:
    """Mask of the truncated strip: K perforated cells, J filled cells, K perforated cells."""
    n1, n2 = grid.counts(strip.cell)
    holes = grid.hole_nodes(strip.cell)
    active = np.ones((strip.n_cells * n2, n1), dtype=bool)
    for c in range(strip.n_cells):
        if strip.K <= c < strip.K + strip.J:
            continue
        _punch(active, holes, c * n2, 0)
    active[0, :] = False
    return DomainMask(
        active,
        grid.h,
        -strip.cell.l1,
        strip_row_offset(strip),
        wrap1=True,
        wrap2=False,
        period_cells=(1, strip.n_cells),
    )


def build_window_mask(window: WindowSpec, grid: GridSpec) -> DomainMask:
    """Dirichlet window over cells ``columns x rows``; holes filled at ``filled_cells``."""
    cell = window.cell
    n1, n2 = grid.counts(cell)
    holes = grid.hole_nodes(cell)
    a1, b1 = window.columns
    a2, b2 = window.rows
    ncols, nrows = b1 - a1 + 1, b2 - a2 + 1
    active = np.ones((nrows * n2, ncols * n1), dtype=bool)
    for alpha2 in range(a2, b2 + 1):
        for alpha1 in range(a1, b1 + 1):
            if (alpha1, alpha2) in window.filled_cells:
                continue
            _punch(active, holes, (alpha2 - a2) * n2, (alpha1 - a1) * n1)
    active[0, :] = False
    active[:, 0] = False
    return DomainMask(
        active,
        grid.h,
        2 * cell.l1 * a1 - cell.l1,
        2 * cell.l2 * a2 - cell.l2,
        wrap1=False,
        wrap2=False,
        period_cells=(ncols, nrows),
    )

