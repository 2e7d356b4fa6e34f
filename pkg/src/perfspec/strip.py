"""Waveguide dispersion on the truncated perforated strip."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .bands import FriedrichsResult, theta_axis
from .eigensolve import EigenPair, EigensolveError, SolverOptions, clusters, smallest_eigenpairs
from .errors import ScientificInvariantError
from .geometry import CellSpec, GridSpec, StripSpec, build_cell_mask, build_strip_mask
from .operator import BlochParameter, assemble


class StripError(ValueError):
    pass


def m_sharp(l2: float, J: int) -> float:
    """Upper end of the waveguide band: pi^2 l2^-2 (2J)^-2."""
    return math.pi**2 / (l2**2 * (2 * J) ** 2)


def trapped_margin(ess: float) -> float:
    return max(1e-8, 1e-3 * abs(ess))


@dataclass(frozen=True)
class DispersionSample:
    zeta: float
    M1: float
    M2: float
    ess: float

    @property
    def trapped(self) -> bool:
        return self.M1 < self.ess - trapped_margin(self.ess)


@dataclass(frozen=True, eq=False)
class DispersionCurve:
    strip: StripSpec
    grid: GridSpec
    samples: tuple[DispersionSample, ...]

    @property
    def M_sharp(self) -> float:
        return m_sharp(self.strip.cell.l2, self.strip.J)

    @property
    def zetas(self) -> np.ndarray:
        return np.array([s.zeta for s in self.samples])

    @property
    def M1(self) -> np.ndarray:
        return np.array([s.M1 for s in self.samples])

    def at(self, zeta: float, atol: float = 1e-12) -> DispersionSample:
        for s in self.samples:
            if abs(s.zeta - zeta) <= atol:
                return s
        raise KeyError(zeta)

    @property
    def M1_at_zero(self) -> float:
        return self.at(0.0).M1


@dataclass(frozen=True)
class Condition27Report:
    M_sharp: float
    lambda_star: float
    bound: float
    holds: bool


@dataclass(frozen=True)
class WaveguideBand:
    lower: float | None
    upper: float | None
    below_cutoff: bool | None
    reason: str = ""

    @property
    def nonempty(self) -> bool:
        return self.lower is not None


@dataclass(frozen=True, eq=False)
class DecayEstimate:
    beta_hat: float
    cell_norms: np.ndarray
    decaying: bool


def default_zetas(n_uniform: int = 33) -> list[float]:
    """Uniform samples over [-pi, pi] plus a refinement near 0."""
    z = set(np.round(np.linspace(-np.pi, np.pi, n_uniform), 15).tolist())
    z.update([-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2])
    z.discard(-0.0)
    z.add(0.0)
    return sorted(z)


def essential_bound(
    zeta: float, cell: CellSpec, grid: GridSpec, sampling: int = 17, opts: SolverOptions | None = None, mask=None
) -> float:
    """Bottom of the strip's essential spectrum at x1-phase ``zeta``."""
    if sampling < 9:
        raise StripError(f"essential-spectrum sampling must be >= 9, got {sampling}")
    mask = build_cell_mask(cell, grid) if mask is None else mask
    best = math.inf
    for t2 in theta_axis(sampling if sampling % 2 else sampling + 1):
        op = assemble(mask, BlochParameter(float(zeta), float(t2)))
        best = min(best, smallest_eigenpairs(op, 1, opts)[0].value)
    return best


def strip_eigenpairs(
    strip: StripSpec, grid: GridSpec, zeta: float, k: int = 2, opts: SolverOptions | None = None, mask=None
) -> list[EigenPair]:
    mask = build_strip_mask(strip, grid) if mask is None else mask
    op = assemble(mask, BlochParameter(float(zeta), 0.0))
    try:
        return smallest_eigenpairs(op, k, opts)
    except EigensolveError as exc:
        raise EigensolveError(f"strip zeta={zeta:.6g}: {exc}") from exc


def dispersion_curve(
    strip: StripSpec,
    grid: GridSpec,
    zetas=None,
    ess_sampling: int = 17,
    opts: SolverOptions | None = None,
    threads: int = 1,
) -> DispersionCurve:
    """Lowest two strip eigenvalues and the essential bound at each phase."""
    zetas = default_zetas() if zetas is None else sorted(float(z) for z in zetas)
    if not any(z == 0.0 for z in zetas):
        raise StripError("zeta = 0 must be among the samples")
    strip_mask = build_strip_mask(strip, grid)
    cell_mask = build_cell_mask(strip.cell, grid)

    def one(z):
        pairs = strip_eigenpairs(strip, grid, z, 2, opts, strip_mask)
        ess = essential_bound(z, strip.cell, grid, ess_sampling, opts, cell_mask)
        return DispersionSample(z, pairs[0].value, pairs[1].value, ess)

    return DispersionCurve(strip, grid, tuple(ordered_map(one, zetas, threads)))


def check_uniqueness(curve: DispersionCurve, tol: float = 1e-6) -> list[float]:
    """Second eigenvalue >= M_sharp - tol at every trapped sample.

    Returns the per-sample slack ``M2 - M_sharp``; a multiple first eigenvalue
    or a second eigenvalue inside (0, M_sharp) raises.
    """
    slack = []
    for s in curve.samples:
        if not s.trapped:
            continue
        if len(clusters([s.M1, s.M2])) == 1:
            raise ScientificInvariantError(f"degenerate lowest strip eigenvalue at zeta={s.zeta}: {s.M1}, {s.M2}")
        if s.M2 < curve.M_sharp - tol:
            raise ScientificInvariantError(
                f"second strip eigenvalue {s.M2} inside (0, M_sharp={curve.M_sharp}) at zeta={s.zeta}"
            )
        slack.append(s.M2 - curve.M_sharp)
    return slack


def check_condition_27(strip: StripSpec, lambda_star: FriedrichsResult) -> Condition27Report:
    ms = m_sharp(strip.cell.l2, strip.J)
    bound = min(math.pi**2, lambda_star.lambda_star)
    return Condition27Report(ms, lambda_star.lambda_star, bound, ms < bound)


def waveguide_band(curve: DispersionCurve, cutoff: float | None = None) -> WaveguideBand:
    """[M1(0), min(M_sharp, max trapped M1)) and its position relative to the cell cutoff."""
    s0 = curve.at(0.0)
    if not s0.trapped:
        return WaveguideBand(None, None, None, "no waveguide band: zeta=0 sample is not below the essential spectrum")
    top = max(s.M1 for s in curve.samples if s.trapped)
    upper = min(curve.M_sharp, top)
    below = None if cutoff is None else bool(upper <= cutoff + 1e-8)
    return WaveguideBand(s0.M1, upper, below)


def slab_decay(norms, period: float, threshold: float = 1e-3) -> DecayEstimate:
    """Exponential rate from slab norms ordered outward; the last slab is dropped."""
    norms = np.asarray(norms, dtype=float)
    if norms.size < 3:
        raise StripError(f"need at least 3 outward slabs, got {norms.size}")
    used = norms[:-1]
    rates = -np.log(used[1:] / used[:-1]) / period
    beta = float(rates.mean())
    decaying = bool(beta > threshold and np.all(np.diff(used) < 0))
    return DecayEstimate(beta, norms, decaying)


def decay_rate(pair: EigenPair, strip: StripSpec, grid: GridSpec) -> DecayEstimate:
    """Per-length decay of the slab norms away from the inclusion, both sides combined."""
    if strip.K < 3:
        raise StripError(f"need at least 3 outward slabs, strip has K={strip.K}")
    mask = build_strip_mask(strip, grid)
    _, n2 = grid.counts(strip.cell)
    if np.shape(pair.field) != (mask.n_active,):
        raise StripError(f"field of length {np.size(pair.field)} does not match the strip ({mask.n_active} nodes)")
    field = mask.scatter(pair.field, 0.0)

    def slab(c):
        return float(np.sum(np.abs(field[c * n2 : (c + 1) * n2]) ** 2))

    top0 = strip.K + strip.J
    norms = [grid.h * math.sqrt(slab(top0 + d) + slab(strip.K - 1 - d)) for d in range(strip.K)]
    return slab_decay(norms, 2 * strip.cell.l2)
