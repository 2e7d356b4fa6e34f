"""Jordan chain at zero phase, energy-flux form and wave classification.

Wave fields are stored over one strip period in polynomial-Floquet form

    w(x) = exp(i k x1) * (phi0(x) + x1 * phi1(x)),

with ``phi0``, ``phi1`` periodic in x1 and ``k = zeta / (2 l1)`` the wavenumber.
The discrete x1-derivative is the central difference on the infinite lattice,
which for this form is exact:

    D w = exp(i k x1) * (D_k phi0 + x1 D_k phi1 + Avg_k phi1)

with ``D_k = (e^{ikh} S+ - e^{-ikh} S-) / 2h`` and ``Avg_k = (e^{ikh} S+ + e^{-ikh} S-) / 2``.
``-2i D_0`` and ``2 Avg_0`` are the first and second k-derivatives of the
discrete strip pencil, so the grid-level chain satisfies the flux identities
exactly, not only up to O(h^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigensolve import EigenPair, SolverOptions
from .errors import ScientificInvariantError
from .geometry import DomainMask, GridSpec, StripSpec, build_strip_mask
from .operator import BlochParameter, assemble
from .strip import DispersionCurve, StripError, essential_bound, strip_eigenpairs, trapped_margin

STANDING = "standing"
RESONANCE = "resonance"
PACKET = "packet"
PROPAGATING = "propagating"

OUTGOING = "Outgoing"
INCOMING = "Incoming"
NULL = "Null"


class FloquetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WaveField:
    kind: str
    k: float
    phi0: np.ndarray  # over active strip nodes
    phi1: np.ndarray
    mask: DomainMask

    @property
    def zeta(self) -> float:
        return self.k * self.mask.nx * self.mask.h

    def __add__(self, other: "WaveField") -> "WaveField":
        _same(self, other)
        if self.k != other.k:
            raise FloquetError("cannot add fields with different wavenumbers")
        return WaveField(PACKET, self.k, self.phi0 + other.phi0, self.phi1 + other.phi1, self.mask)

    def __neg__(self) -> "WaveField":
        return WaveField(self.kind, self.k, -self.phi0, -self.phi1, self.mask)

    def __sub__(self, other: "WaveField") -> "WaveField":
        return self + (-other)

    def scaled(self, c: complex) -> "WaveField":
        return WaveField(self.kind, self.k, c * self.phi0, c * self.phi1, self.mask)

    def conj(self) -> "WaveField":
        return WaveField(self.kind, -self.k, self.phi0.conj(), self.phi1.conj(), self.mask)


@dataclass(frozen=True, eq=False)
class JordanChain:
    W0: np.ndarray
    W1: np.ndarray
    b: float
    b_imag: float
    norm_W0_sq: float
    M0: float
    compatibility: float
    residual: float
    strip: StripSpec
    grid: GridSpec
    mask: DomainMask

    @property
    def curvature(self) -> float:
        """Predicted d^2 M1 / dk^2 / 2 at k = 0."""
        return self.b / self.norm_W0_sq

    def standing(self) -> WaveField:
        z = np.zeros_like(self.W1)
        return WaveField(STANDING, 0.0, self.W0.astype(complex), z, self.mask)

    def resonance(self) -> WaveField:
        return WaveField(RESONANCE, 0.0, self.W1.copy(), 1j * self.W0.astype(complex), self.mask)


@dataclass(frozen=True)
class WaveClassification:
    q_value: complex
    verdict: str
    margin: float


@dataclass(frozen=True, eq=False)
class PacketReport:
    w_plus: WaveField
    w_minus: WaveField
    q: np.ndarray  # 2x2, rows/cols ordered (w+, w-)
    rel_error_diag: float
    offdiag_over_b: float
    passed: bool


@dataclass(frozen=True)
class ParabolaReport:
    predicted: float
    fitted: float
    rel_error: float
    r_ratio: float
    passed: bool


def _same(u: WaveField, v: WaveField) -> None:
    if not u.mask.same_grid(v.mask):
        raise FloquetError("fields live on different grids")


def _grid(mask: DomainMask, vec: np.ndarray) -> np.ndarray:
    return mask.scatter(np.asarray(vec, dtype=complex), 0.0)


def _shift_ops(F: np.ndarray, k: float, h: float):
    ph = np.exp(1j * k * h)
    plus = ph * np.roll(F, -1, axis=1)
    minus = np.roll(F, 1, axis=1) / ph
    return (plus - minus) / (2 * h), (plus + minus) / 2


def period_wavenumber(mask: DomainMask, zeta: float) -> float:
    return zeta / (mask.nx * mask.h)


def _evaluate(w: WaveField, offset: int):
    """Field and its x1-difference on the window of columns offset..offset+nx-1."""
    m = w.mask
    nx, h = m.nx, m.h
    P0, P1 = _grid(m, w.phi0), _grid(m, w.phi1)
    D0, _ = _shift_ops(P0, w.k, h)
    D1, A1 = _shift_ops(P1, w.k, h)
    cols = np.arange(offset, offset + nx)
    pc = cols % nx
    x = m.x0 + cols * h
    e = np.exp(1j * w.k * x)[None, :]
    val = e * (P0[:, pc] + x[None, :] * P1[:, pc])
    der = e * (D0[:, pc] + x[None, :] * D1[:, pc] + A1[:, pc])
    return val, der


def symplectic_form(u: WaveField, v: WaveField, offset: int = 0) -> complex:
    """h^2-weighted sum of conj(v) D u - u conj(D v) over one period of columns."""
    _same(u, v)
    uu, du = _evaluate(u, offset)
    vv, dv = _evaluate(v, offset)
    h = u.mask.h
    return complex(h * h * np.sum(vv.conj() * du - uu * dv.conj()))


def field_norm_sq(w: WaveField, offset: int = 0) -> float:
    val, _ = _evaluate(w, offset)
    return float(w.mask.h**2 * np.sum(np.abs(val) ** 2))


def classify_wave(w: WaveField, rel_threshold: float = 1e-6) -> WaveClassification:
    """Outgoing when Im q(w, w) > 0, incoming when < 0, relative to the field energy."""
    q = symplectic_form(w, w)
    energy = field_norm_sq(w)
    threshold = rel_threshold * energy
    if q.imag > threshold:
        verdict = OUTGOING
    elif q.imag < -threshold:
        verdict = INCOMING
    else:
        verdict = NULL
    return WaveClassification(q, verdict, abs(q.imag) / energy if energy else 0.0)


def _x1_difference(mask: DomainMask) -> sp.csr_matrix:
    """Central x1-difference at k = 0 over active nodes (periodic, masked)."""
    idx = mask.index()
    rr, cc = np.nonzero(mask.active)
    p = idx[rr, cc]
    rows, cols, vals = [], [], []
    for step, sign in ((1, 1.0), (-1, -1.0)):
        q = idx[rr, (cc + step) % mask.nx]
        ok = q >= 0
        rows.append(p[ok])
        cols.append(q[ok])
        vals.append(np.full(ok.sum(), sign / (2 * mask.h)))
    n = mask.n_active
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _x1_average(mask: DomainMask) -> sp.csr_matrix:
    D = _x1_difference(mask)
    # |D| * h == (S+ + S-)/2 on the same pattern
    return abs(D) * mask.h


def projected_cg(A, rhs: np.ndarray, null: np.ndarray, tol: float = 1e-10, maxiter: int | None = None):
    """Solve A y = rhs on the orthogonal complement of the unit vector ``null``."""

    def proj(v):
        return v - null * (null @ v)

    maxiter = maxiter or 20 * len(rhs)
    r = proj(rhs)
    bnorm = np.linalg.norm(r)
    y = np.zeros_like(r)
    if bnorm == 0:
        return y, 0
    p = r.copy()
    rs = r @ r
    for it in range(1, maxiter + 1):
        Ap = proj(A @ p)
        alpha = rs / (p @ Ap)
        y += alpha * p
        r -= alpha * Ap
        rs_new = r @ r
        if math.sqrt(rs_new) <= tol * bnorm:
            return proj(y), it
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise FloquetError(f"projected CG did not reach {tol:g} in {maxiter} iterations")


def jordan_chain(strip: StripSpec, grid: GridSpec, opts: SolverOptions | None = None, ess_sampling: int = 17) -> JordanChain:
    """Eigenfield and associated field of the strip pencil at zero phase, plus b."""
    opts = opts or SolverOptions(tol=1e-11)
    mask = build_strip_mask(strip, grid)
    pairs = strip_eigenpairs(strip, grid, 0.0, 2, opts, mask)
    M0 = pairs[0].value
    ess = essential_bound(0.0, strip.cell, grid, ess_sampling, opts)
    if not M0 < ess - trapped_margin(ess):
        raise StripError(f"no trapped mode at zeta=0: M1={M0} vs essential bound {ess}")
    h = grid.h
    W0 = pairs[0].field.real.copy()
    if np.abs(pairs[0].field.imag).max() > 1e-8 * np.abs(W0).max():
        raise FloquetError("zero-phase eigenfield is not real after phase fixing")
    if W0.sum() < 0:
        W0 = -W0
    W0 /= h * np.linalg.norm(W0)

    A = sp.csr_matrix(assemble(mask, BlochParameter()).matrix.real)
    D = _x1_difference(mask)
    Avg = _x1_average(mask)
    F1 = 2j * (D @ W0)
    compat = abs(h * h * np.sum(W0 * F1))
    shifted = A - M0 * sp.identity(A.shape[0], format="csr")
    unit = W0 / np.linalg.norm(W0)
    y, _ = projected_cg(shifted, 2.0 * (D @ W0), unit, tol=1e-12)
    W1 = 1j * y
    resid_vec = shifted @ W1 - F1
    resid_vec = resid_vec - unit * (unit @ resid_vec)
    F2 = 2j * (D @ W1) - Avg @ W0
    b_c = -h * h * np.sum(F2 * W0)
    chain = JordanChain(
        W0=W0,
        W1=W1,
        b=float(b_c.real),
        b_imag=float(b_c.imag),
        norm_W0_sq=float(h * h * np.sum(W0 * W0)),
        M0=M0,
        compatibility=float(compat),
        residual=float(np.linalg.norm(resid_vec) / max(np.linalg.norm(F1), 1e-300)),
        strip=strip,
        grid=grid,
        mask=mask,
    )
    if chain.compatibility > 1e-8:
        raise ScientificInvariantError(f"compatibility integral {chain.compatibility:.3e} does not vanish")
    if chain.b <= 0:
        raise ScientificInvariantError(f"b = {chain.b} is not positive")
    return chain


def wave_packets(chain: JordanChain, rel_tol: float = 1e-6) -> PacketReport:
    """Linear packets w1 +- w0 and their 2x2 flux matrix."""
    w0, w1 = chain.standing(), chain.resonance()
    wp = w1 + w0
    wm = w1 - w0
    q = np.array(
        [[symplectic_form(wp, wp), symplectic_form(wp, wm)], [symplectic_form(wm, wp), symplectic_form(wm, wm)]]
    )
    b = chain.b
    diag_err = max(abs(q[0, 0] - 2j * b), abs(q[1, 1] + 2j * b)) / (2 * b)
    off = max(abs(q[0, 1]), abs(q[1, 0])) / b
    return PacketReport(wp, wm, q, float(diag_err), float(off), bool(diag_err <= rel_tol and off <= rel_tol))


def propagating_wave(pair: EigenPair, mask: DomainMask, zeta: float) -> WaveField:
    """w+(x) = exp(i k x1) W(x) from a strip eigenpair computed at phase ``zeta``."""
    k = period_wavenumber(mask, zeta)
    x = mask.scatter(np.zeros(mask.n_active), 0.0) + mask.x1[None, :]
    phi0 = np.exp(-1j * k * x[mask.active]) * pair.field
    return WaveField(PROPAGATING, k, phi0, np.zeros_like(phi0), mask)


def floquet_waves(strip: StripSpec, grid: GridSpec, zeta: float, opts: SolverOptions | None = None):
    """(w+, w-) at phase ``zeta`` with w- = conj(w+)."""
    mask = build_strip_mask(strip, grid)
    pair = strip_eigenpairs(strip, grid, zeta, 1, opts, mask)[0]
    wp = propagating_wave(pair, mask, zeta)
    return wp, wp.conj()


def group_velocity_check(curve: DispersionCurve, wave: WaveField, zeta: float) -> dict:
    """Central-difference dM1/dk against a / ||W||^2 with i a = q(w+, w+)."""
    z = curve.zetas
    i = int(np.argmin(np.abs(z - zeta)))
    if abs(z[i] - zeta) > 1e-12:
        raise FloquetError(f"zeta={zeta} is not a curve sample")
    if i == 0 or i == len(z) - 1:
        raise FloquetError(f"zeta={zeta} is a boundary sample")
    if abs(wave.zeta - zeta) > 1e-9:
        raise FloquetError("wave field computed at a different phase")
    period = 2 * curve.strip.cell.l1
    M = curve.M1
    slope = (M[i + 1] - M[i - 1]) / (z[i + 1] - z[i - 1]) * period
    a = symplectic_form(wave, wave).imag
    rhs = a / field_norm_sq(wave)
    rel = abs(slope - rhs) / abs(slope) if slope != 0 else math.inf
    return {"zeta": float(zeta), "dM_dk": float(slope), "a_over_norm": float(rhs), "a": float(a), "rel_error": float(rel)}


def parabola_check(
    curve: DispersionCurve, chain: JordanChain, z1: float = 0.05, z2: float = 0.1, window: float = 0.2, rel_tol: float = 5e-2
) -> ParabolaReport:
    """Near-zero curvature of M1 against b / ||W0||^2, plus quartic decay of the remainder."""
    z = curve.zetas
    M = curve.M1
    near = np.abs(z) <= window + 1e-12
    if near.sum() < 5 or not all(np.any(np.abs(z - s) < 1e-12) for s in (z1, z2)):
        raise FloquetError("insufficient samples near zeta = 0")
    period = 2 * curve.strip.cell.l1
    k = z[near] / period
    M0 = curve.M1_at_zero
    design = np.column_stack([np.ones_like(k), k**2])
    coef, *_ = np.linalg.lstsq(design, M[near], rcond=None)
    fitted = float(coef[1])
    predicted = chain.curvature

    def r(s):
        return curve.at(s).M1 - M0 - predicted * (s / period) ** 2

    ratio = r(z2) / r(z1) if r(z1) != 0 else math.inf
    expect = (z2 / z1) ** 4
    rel = abs(fitted - predicted) / abs(predicted)
    passed = rel <= rel_tol and predicted > 0 and expect / 2 <= ratio <= expect * 2
    return ParabolaReport(predicted, fitted, float(rel), float(ratio), bool(passed))
