"""Smallest eigenpairs of a HermitianOperator.

The iterative path is a block shift-invert Krylov method: the operator
``(A + s I)^{-1}`` (sparse LU, ``s > 0``) generates a block Krylov space that is
fully re-orthogonalised and then projected onto ``A`` (Rayleigh-Ritz). The
leading Ritz block restarts the next sweep. Blocks are wider than ``k`` so that
degenerate clusters are resolved, which a single-vector Lanczos run cannot do.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operator import HermitianOperator


class EigensolveError(RuntimeError):
    """The iteration did not reach the requested residual within its budget."""


class DenseCapError(ValueError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_restarts: int = 50
    depth: int = 5
    extra_block: int = 4
    shift: float | None = None
    seed: int = 0
    dense_cap: int = 4000


@dataclass(frozen=True, eq=False)
class EigenPair:
    value: float
    # normalised so that h^2 * sum(w |field|^2) = 1
    field: np.ndarray
    # ||A x - value x|| / ||A||_inf for the unit-l2 Ritz vector x
    residual: float


def _default_shift(op: HermitianOperator) -> float:
    m = op.mask
    extent = max(m.nx, m.ny) * m.h
    return 1.0 / extent**2


def _orthonormalise(Y: np.ndarray, basis: list[np.ndarray], drop: float) -> np.ndarray:
    """Orthonormal block spanning ``Y`` minus its projection on ``basis``.

    Columns are equilibrated first so that tiny residual directions keep their
    relative accuracy through the QR step.
    """
    norms = np.linalg.norm(Y, axis=0)
    Y = Y[:, norms > 0] / norms[norms > 0]
    for _ in range(2):
        for B in basis:
            Y = Y - B @ (B.conj().T @ Y)
    norms = np.linalg.norm(Y, axis=0)
    keep = norms > drop
    Y = Y[:, keep] / norms[keep]
    if Y.shape[1] == 0:
        return Y
    Q, R = np.linalg.qr(Y)
    Q = Q[:, np.abs(np.diag(R)) > drop]
    for B in basis:
        Q = Q - B @ (B.conj().T @ Q)
    Q, _ = np.linalg.qr(Q)
    return Q


def _fix_phase(x: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(x)))
    if x[j] == 0:
        return x
    return x * (abs(x[j]) / x[j])


def smallest_eigenpairs(op: HermitianOperator, k: int, opts: SolverOptions | None = None) -> list[EigenPair]:
    """The ``k`` smallest eigenpairs, ascending."""
    opts = opts or SolverOptions()
    n = op.dimension
    if k < 1 or k >= n:
        raise ValueError(f"need 1 <= k < dimension ({n}), got k={k}")
    A = op.matrix
    real = op.is_real
    if real:
        A = sp.csr_matrix(A.real)
    dtype = np.float64 if real else np.complex128
    s = opts.shift if opts.shift is not None else _default_shift(op)
    lu = spla.splu(sp.csc_matrix(A + s * sp.identity(n, dtype=dtype, format="csr")))
    norm_a = op.norm_bound()

    b = min(n, k + max(opts.extra_block, 2))
    rng = np.random.default_rng(opts.seed)
    X = rng.standard_normal((n, b))
    if not real:
        X = X + 1j * rng.standard_normal((n, b))
    X, _ = np.linalg.qr(X.astype(dtype))

    res = np.full(k, np.inf)
    AX = A @ X
    G = X.conj().T @ AX
    theta, Z = sla.eigh(0.5 * (G + G.conj().T))
    X, AX = X @ Z, AX @ Z
    prev = None
    for sweep in range(opts.max_restarts):
        R = AX - X * theta[: X.shape[1]]
        res = np.linalg.norm(R[:, :k], axis=0) / norm_a
        if np.all(res <= opts.tol):
            break
        # correction blocks: (A + sI)^{-1} applied to the residuals, then a
        # short Krylov extension of those corrections
        blocks = [X] if prev is None else [X, _orthonormalise(prev, [X], 1e-10)]
        blocks = [B for B in blocks if B.shape[1]]
        T = R
        for _ in range(opts.depth):
            if sum(B.shape[1] for B in blocks) >= n:
                break
            T = lu.solve(T)
            Q = _orthonormalise(T, blocks, 1e-10)
            if Q.shape[1] == 0:
                break
            blocks.append(Q)
            T = Q
        S = np.hstack(blocks)
        AS = A @ S
        G = S.conj().T @ AS
        theta, Z = sla.eigh(0.5 * (G + G.conj().T))
        m = min(b, len(theta))
        X_new = S @ Z[:, :m]
        prev = X_new - X @ (X.conj().T @ X_new)
        X, AX = X_new, AS @ Z[:, :m]
    else:
        raise EigensolveError(
            f"no convergence after {opts.max_restarts} sweeps (n={n}, k={k}, worst residual {res.max():.3e}, tol {opts.tol:g})"
        )

    pairs = []
    for j in range(k):
        x = X[:, j] / np.linalg.norm(X[:, j])
        value = float(np.real(np.vdot(x, A @ x)))
        x = _fix_phase(x.astype(np.complex128))
        field = x / op.h
        if op.weights is not None:
            field = field / np.sqrt(op.weights)
        pairs.append(EigenPair(value, field, float(res[j])))
    pairs.sort(key=lambda p: p.value)
    return pairs


def dense_reference(op, cap: int | None = None) -> np.ndarray:
    """Full ascending spectrum from a dense Hermitian solve.

    ``op`` is a HermitianOperator or a square Hermitian array.
    """
    cap = SolverOptions().dense_cap if cap is None else cap
    M = op.dense() if isinstance(op, HermitianOperator) else np.asarray(op)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > cap:
        raise DenseCapError(f"dimension {M.shape[0]} exceeds dense cap {cap}")
    if np.iscomplexobj(M) and not np.any(M.imag):
        M = M.real
    return np.linalg.eigvalsh(M)


def clusters(values, rel: float = 1e-8) -> list[list[int]]:
    """Group indices of ascending values that agree within ``rel`` relative."""
    values = np.asarray(values, dtype=float)
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups:
            ref = values[groups[-1][-1]]
            if abs(v - ref) <= rel * max(abs(v), abs(ref), 1e-300):
                groups[-1].append(i)
                continue
        groups.append([i])
    return groups
