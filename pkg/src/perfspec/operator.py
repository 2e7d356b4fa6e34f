"""Discrete negative Laplacian with Bloch phases on a node mask."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .geometry import DomainMask

SIDES = ("left", "right", "bottom", "top")
_PI_SLACK = 1e-12


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class BlochParameter:
    """Phase per full period along x1 and x2, in radians."""

    theta1: float = 0.0
    theta2: float = 0.0

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            t = getattr(self, name)
            if not (-math.pi - _PI_SLACK <= t <= math.pi + _PI_SLACK):
                raise OperatorError(f"{name}={t} outside [-pi, pi]")

    def conjugate(self) -> "BlochParameter":
        return BlochParameter(-self.theta1, -self.theta2)

    def eta(self, l1: float, l2: float) -> tuple[float, float]:
        """Dual (wavenumber) variable: theta_j / (2 l_j)."""
        return self.theta1 / (2 * l1), self.theta2 / (2 * l2)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: sp.csr_matrix
    mask: DomainMask
    bloch: BlochParameter
    outer: dict
    # trapezoid weights on Neumann-closed masks, None otherwise; the stored
    # matrix is W^(1/2) A W^(-1/2)
    weights: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def h(self) -> float:
        return self.mask.h

    @property
    def is_real(self) -> bool:
        return not np.any(self.matrix.data.imag)

    @property
    def has_dirichlet(self) -> bool:
        """True when some eliminated node or truncated side touches the active set."""
        m = self.mask
        if not m.active.all():
            return True
        return any(k == "dirichlet" for side, k in self.outer.items() if not self._wrapped(side))

    def _wrapped(self, side: str) -> bool:
        return self.mask.wrap1 if side in ("left", "right") else self.mask.wrap2

    def norm_bound(self) -> float:
        """Max absolute row sum (an upper bound on the spectral radius)."""
        return float(np.abs(self.matrix).sum(axis=1).max())

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _normalise_outer(outer) -> dict:
    if outer is None:
        outer = "dirichlet"
    if isinstance(outer, str):
        outer = {s: outer for s in SIDES}
    out = {}
    for s in SIDES:
        kind = str(outer.get(s, "dirichlet")).lower()
        if kind not in ("dirichlet", "neumann"):
            raise OperatorError(f"unknown boundary kind {kind!r} on side {s}")
        out[s] = kind
    return out


def trapezoid_weights(mask: DomainMask, neumann: dict) -> np.ndarray:
    """Quadrature weight per active node: 1/2 per Neumann side the node sits on."""
    w = np.ones(mask.active.shape)
    if neumann["left"]:
        w[:, 0] *= 0.5
    if neumann["right"]:
        w[:, -1] *= 0.5
    if neumann["bottom"]:
        w[0, :] *= 0.5
    if neumann["top"]:
        w[-1, :] *= 0.5
    return w[mask.active]


def assemble(mask: DomainMask, bloch: BlochParameter | None = None, outer=None) -> HermitianOperator:
    """5-point stencil over active nodes with phase ``e^{i theta_j}`` across the +x_j seam."""
    if bloch is None:
        bloch = BlochParameter()
    outer = _normalise_outer(outer)
    neumann = {s: outer[s] == "neumann" for s in SIDES}
    for s in SIDES:
        wrapped = mask.wrap1 if s in ("left", "right") else mask.wrap2
        if neumann[s] and wrapped:
            raise OperatorError(f"Neumann requested on periodic side {s}")
        if neumann[s] and not mask.neumann_closed:
            raise OperatorError(f"Neumann side {s} needs a closed mask (boundary nodes stored)")
    phase1 = complex(np.exp(1j * bloch.theta1)) if mask.wrap1 else 1.0
    phase2 = complex(np.exp(1j * bloch.theta2)) if mask.wrap2 else 1.0
    index = mask.index()
    flags = np.array([neumann[s] for s in SIDES], dtype=bool)
    rows, cols, vals = kernels.stencil_triplets(
        mask.active, index, mask.wrap1, mask.wrap2, phase1, phase2, flags, 1.0 / mask.h**2
    )
    n = mask.n_active
    weights = None
    if flags.any():
        weights = trapezoid_weights(mask, neumann)
        sw = np.sqrt(weights)
        vals = vals * (sw[rows] / sw[cols])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return HermitianOperator(A, mask, bloch, outer, weights)


def matvec(op: HermitianOperator, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (op.dimension,):
        raise OperatorError(f"vector of shape {v.shape} does not match dimension {op.dimension}")
    A = op.matrix
    return kernels.csr_matvec(A.indptr, A.indices, A.data, v)


def hermiticity_defect(op: HermitianOperator) -> float:
    """max |A_ij - conj(A_ji)| over the stored pattern."""
    A = op.matrix
    D = (A - A.conj().T).tocoo()
    return float(np.abs(D.data).max()) if D.nnz else 0.0


def plane_wave_eigenvalues(n1: int, n2: int, h: float, theta1: float, theta2: float) -> np.ndarray:
    """Closed-form spectrum of the phased periodic 5-point stencil, ascending."""
    m1 = np.arange(n1)
    m2 = np.arange(n2)
    s1 = np.sin((theta1 + 2 * np.pi * m1) / (2 * n1)) ** 2
    s2 = np.sin((theta2 + 2 * np.pi * m2) / (2 * n2)) ** 2
    return np.sort(((4.0 / h**2) * (s1[None, :] + s2[:, None])).ravel())
