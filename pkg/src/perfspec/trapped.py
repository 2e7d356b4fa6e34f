"""Ground state of the locally perturbed waveguide on a finite Dirichlet window.

The perturbation is a block of ``J1 x J2`` filled cells; the waveguide is ``J``
filled rows (cell rows 1..J) leaving the block to the right. The block's
principal Dirichlet eigenfunction is a product of cosines and bounds the window
ground state from above through the Rayleigh quotient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolve import EigenPair, SolverOptions, smallest_eigenpairs
from .geometry import CellSpec, GridSpec, WindowSpec, build_window_mask
from .operator import assemble
from .strip import DecayEstimate, slab_decay


class TrappedError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbedLayout:
    window: WindowSpec
    block_columns: tuple[int, int]
    block_rows: tuple[int, int]
    guide_rows: tuple[int, int]
    guide_length: int
    padding: int

    @property
    def cell(self) -> CellSpec:
        return self.window.cell

    @property
    def J1(self) -> int:
        return self.block_columns[1] - self.block_columns[0] + 1

    @property
    def J2(self) -> int:
        return self.block_rows[1] - self.block_rows[0] + 1


@dataclass(frozen=True, eq=False)
class TrappedReport:
    lambda_computed: float
    lambda_square: float
    rayleigh_u_square: float
    M1_at_zero: float
    decay: dict
    verdict: str
    checks: dict


def explicit_bound(J1: int, J2: int, cell: CellSpec) -> float:
    """Principal Dirichlet eigenvalue of the 2 J1 l1 x 2 J2 l2 rectangle."""
    if J1 < 1 or J2 < 1:
        raise TrappedError(f"J1, J2 must be >= 1, got {J1}, {J2}")
    return (math.pi**2 / 4) * (1 / (J1 * cell.l1) ** 2 + 1 / (J2 * cell.l2) ** 2)


def perturbed_layout(
    cell: CellSpec, J: int, J1: int, J2: int, guide_length: int = 6, padding: int = 5, filled_block: bool = True
) -> PerturbedLayout:
    """Window around a filled ``J1 x J2`` block with ``J`` guide rows running right."""
    if J < 1 or J1 < 1 or J2 < 1:
        raise TrappedError("J, J1, J2 must be >= 1")
    c0 = -(J1 // 2)
    r0 = 1 + (J - J2) // 2
    block_cols = (c0, c0 + J1 - 1)
    block_rows = (r0, r0 + J2 - 1)
    columns = (c0 - padding, block_cols[1] + guide_length)
    rows = (r0 - padding, block_rows[1] + padding)
    filled = set()
    if filled_block:
        filled.update((a1, a2) for a1 in range(block_cols[0], block_cols[1] + 1) for a2 in range(block_rows[0], block_rows[1] + 1))
        filled.update((a1, a2) for a1 in range(block_cols[1] + 1, columns[1] + 1) for a2 in range(1, J + 1))
    window = WindowSpec(cell, columns, rows, frozenset(filled))
    return PerturbedLayout(window, block_cols, block_rows, (1, J), guide_length, padding)


def _check_layout(layout: PerturbedLayout) -> None:
    if layout.guide_length < 4:
        raise TrappedError(f"need >= 4 guide cells, got {layout.guide_length}")
    if layout.padding < 4:
        raise TrappedError(f"need >= 4 perforated padding cells, got {layout.padding}")
    g0, g1 = layout.guide_rows
    if layout.window.filled_cells and not (layout.block_rows[0] <= g0 and g1 <= layout.block_rows[1]):
        raise TrappedError("guide rows must leave the block through its right side")


def perturbed_ground_state(layout: PerturbedLayout, grid: GridSpec, opts: SolverOptions | None = None) -> EigenPair:
    _check_layout(layout)
    op = assemble(build_window_mask(layout.window, grid))
    return smallest_eigenpairs(op, 1, opts)[0]


def u_square(layout: PerturbedLayout, grid: GridSpec) -> np.ndarray:
    """Rasterised block eigenfunction over the window's active nodes (zero off the block)."""
    cell = layout.cell
    mask = build_window_mask(layout.window, grid)
    xa = 2 * cell.l1 * layout.block_columns[0] - cell.l1
    xb = 2 * cell.l1 * (layout.block_columns[1] + 1) - cell.l1
    ya = 2 * cell.l2 * layout.block_rows[0] - cell.l2
    yb = 2 * cell.l2 * (layout.block_rows[1] + 1) - cell.l2
    x1 = mask.x1
    x2 = mask.x2
    fx = np.where((x1 > xa) & (x1 < xb), np.cos(math.pi * (x1 - 0.5 * (xa + xb)) / (xb - xa)), 0.0)
    fy = np.where((x2 > ya) & (x2 < yb), np.cos(math.pi * (x2 - 0.5 * (ya + yb)) / (yb - ya)), 0.0)
    U = fy[:, None] * fx[None, :]
    return U[mask.active]


def rayleigh_quotient_u_square(layout: PerturbedLayout, grid: GridSpec) -> float:
    """Discrete Rayleigh quotient of the block test function on the window operator."""
    op = assemble(build_window_mask(layout.window, grid))
    u = u_square(layout, grid)
    A = op.matrix.real
    return float(u @ (A @ u) / (u @ u))


def directional_decay(pair: EigenPair, layout: PerturbedLayout, grid: GridSpec) -> dict[str, DecayEstimate]:
    """Slab-norm decay from the block outward: left, right (along the guide), down, up."""
    cell = layout.cell
    mask = build_window_mask(layout.window, grid)
    n1, n2 = grid.counts(cell)
    F = np.abs(mask.scatter(pair.field, 0.0)) ** 2
    a1, b1 = layout.window.columns
    a2, b2 = layout.window.rows

    def col(alpha1):
        j = (alpha1 - a1) * n1
        return grid.h * math.sqrt(F[:, j : j + n1].sum())

    def row(alpha2):
        j = (alpha2 - a2) * n2
        return grid.h * math.sqrt(F[j : j + n2, :].sum())

    bc, br = layout.block_columns, layout.block_rows
    return {
        "left": slab_decay([col(c) for c in range(bc[0] - 1, a1 - 1, -1)], 2 * cell.l1),
        "right": slab_decay([col(c) for c in range(bc[1] + 1, b1 + 1)], 2 * cell.l1),
        "down": slab_decay([row(r) for r in range(br[0] - 1, a2 - 1, -1)], 2 * cell.l2),
        "up": slab_decay([row(r) for r in range(br[1] + 1, b2 + 1)], 2 * cell.l2),
    }


def verify_trapped(
    layout: PerturbedLayout,
    grid: GridSpec,
    pair: EigenPair,
    M1_at_zero: float,
    strip_cell: CellSpec,
    decay: dict | None = None,
    c_h2: float = 1.0,
) -> TrappedReport:
    """Inequality chain lambda <= quotient(u) <= lambda_square + C h^2 and lambda < M1(0)."""
    if strip_cell != layout.cell:
        raise TrappedError("strip and window use different cells")
    lam_sq = explicit_bound(layout.J1, layout.J2, layout.cell)
    rq = rayleigh_quotient_u_square(layout, grid)
    decay = directional_decay(pair, layout, grid) if decay is None else decay
    checks = {
        "lambda_le_quotient": bool(pair.value <= rq),
        "quotient_le_bound": bool(rq <= lam_sq + c_h2 * grid.h**2),
        "below_M1_0": bool(pair.value < M1_at_zero),
        "decay_positive": bool(all(d.beta_hat > 0 and d.decaying for d in decay.values())),
    }
    if lam_sq >= M1_at_zero:
        verdict = "not_applicable"
    else:
        verdict = "pass" if all(checks.values()) else "fail"
    return TrappedReport(pair.value, lam_sq, rq, M1_at_zero, decay, verdict, checks)
