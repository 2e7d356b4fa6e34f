"""Cell band structure, spectral bands, cutoff and the Friedrichs constant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .eigensolve import EigensolveError, SolverOptions, smallest_eigenpairs
from .geometry import CellSpec, GridSpec, build_cell_mask, build_neumann_cell_mask
from .operator import BlochParameter, assemble


class BandsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BandStructure:
    cell: CellSpec
    grid: GridSpec
    thetas: np.ndarray  # (N, 2) phase pairs
    values: np.ndarray  # (N, k) ascending per row

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def cutoff(self) -> float:
        """Bottom of the sampled spectrum: min over samples of the first band."""
        return float(self.values[:, 0].min())

    def index_of(self, theta1: float, theta2: float, atol: float = 1e-12) -> int | None:
        hit = np.flatnonzero(
            (np.abs(self.thetas[:, 0] - theta1) <= atol) & (np.abs(self.thetas[:, 1] - theta2) <= atol)
        )
        return int(hit[0]) if hit.size else None


@dataclass(frozen=True)
class Band:
    n: int
    lo: float
    hi: float


@dataclass(frozen=True)
class BandGap:
    lower_band: int
    lo: float
    hi: float

    @property
    def is_gap(self) -> bool:
        return self.hi > self.lo


@dataclass(frozen=True)
class FriedrichsResult:
    lambda_star: float
    grid: GridSpec


@dataclass(frozen=True)
class LemmaAReport:
    value_at_zero: float
    margin: float
    argmin_theta: tuple[float, float]
    min_margin: float
    passed: bool


def theta_axis(count: int) -> np.ndarray:
    if count < 5 or count % 2 == 0:
        raise BandsError(f"sampling must be odd and >= 5 (to include 0 and +-pi), got {count}")
    axis = np.linspace(-np.pi, np.pi, count)
    axis[count // 2] = 0.0
    return axis


def cell_band_structure(
    cell: CellSpec,
    grid: GridSpec,
    sampling=17,
    k: int = 4,
    opts: SolverOptions | None = None,
    threads: int = 1,
) -> BandStructure:
    """First ``k`` cell eigenvalues on a uniform tensor grid over [-pi, pi]^2."""
    if k < 1:
        raise BandsError(f"k must be >= 1, got {k}")
    s1, s2 = (sampling, sampling) if np.isscalar(sampling) else sampling
    a1, a2 = theta_axis(int(s1)), theta_axis(int(s2))
    thetas = np.array([(t1, t2) for t2 in a2 for t1 in a1])
    mask = build_cell_mask(cell, grid)

    def solve(theta):
        op = assemble(mask, BlochParameter(float(theta[0]), float(theta[1])))
        try:
            pairs = smallest_eigenpairs(op, k, opts)
        except EigensolveError as exc:
            raise EigensolveError(f"theta=({theta[0]:.6g}, {theta[1]:.6g}): {exc}") from exc
        return [p.value for p in pairs]

    values = np.array(ordered_map(solve, thetas, threads), dtype=float)
    return BandStructure(cell, grid, thetas, values)


def spectral_bands(bs: BandStructure) -> list[Band]:
    if bs.values.size == 0:
        raise BandsError("empty band structure")
    return [Band(n + 1, float(bs.values[:, n].min()), float(bs.values[:, n].max())) for n in range(bs.k)]


def band_gaps(bands: list[Band]) -> list[BandGap]:
    """Spacing between consecutive bands; ``hi < lo`` means the bands overlap."""
    return [BandGap(a.n, a.hi, b.lo) for a, b in zip(bands, bands[1:])]


def symmetry_defect(bs: BandStructure) -> float:
    """max |Lambda_n(theta) - Lambda_n(-theta)| over samples whose mirror is sampled."""
    worst = 0.0
    for i, (t1, t2) in enumerate(bs.thetas):
        j = bs.index_of(-t1, -t2)
        if j is not None:
            worst = max(worst, float(np.abs(bs.values[i] - bs.values[j]).max()))
    return worst


def max_neighbor_jump(bs: BandStructure) -> float:
    """Largest change of the first band between adjacent grid samples."""
    t1 = np.unique(bs.thetas[:, 0])
    t2 = np.unique(bs.thetas[:, 1])
    grid = bs.values[:, 0].reshape(len(t2), len(t1))
    return float(max(np.abs(np.diff(grid, axis=0)).max(), np.abs(np.diff(grid, axis=1)).max()))


def friedrichs_constant(cell: CellSpec, grid: GridSpec, opts: SolverOptions | None = None) -> FriedrichsResult:
    """Principal eigenvalue with Neumann on the cell boundary and Dirichlet on the hole."""
    if cell.hole is None:
        raise BandsError("the mixed problem needs a hole (without one the constant is 0)")
    op = assemble(build_neumann_cell_mask(cell, grid), outer="neumann")
    value = smallest_eigenpairs(op, 1, opts)[0].value
    return FriedrichsResult(value, grid)


def check_lemma_a(bs: BandStructure, min_margin: float = 1e-6) -> LemmaAReport:
    """First band strictly minimal at theta = 0."""
    i0 = bs.index_of(0.0, 0.0)
    if i0 is None:
        raise BandsError("band structure has no theta = 0 sample")
    first = bs.values[:, 0]
    others = np.delete(np.arange(len(first)), i0)
    j = others[int(np.argmin(first[others]))]
    margin = float(first[j] - first[i0])
    return LemmaAReport(
        float(first[i0]),
        margin,
        (float(bs.thetas[j, 0]), float(bs.thetas[j, 1])),
        min_margin,
        margin > min_margin,
    )
