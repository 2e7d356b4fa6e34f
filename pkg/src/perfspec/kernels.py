"""Hot inner loops: 5-point stencil assembly and CSR products.

Every kernel has a numba version and a vectorised numpy version with the same
signature. ``USE_NUMBA`` decides which one the public wrappers dispatch to.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAS_NUMBA, njit

USE_NUMBA = HAS_NUMBA

# side order used by the ``neumann`` flag array: x1-, x1+, x2-, x2+
LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3


@njit(cache=True)
def _stencil_numba(active, index, wrap1, wrap2, phase1, phase2, neumann, inv_h2):
    ny, nx = active.shape
    n_active = 0
    for r in range(ny):
        for c in range(nx):
            if active[r, c]:
                n_active += 1
    cap = 5 * n_active
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap, dtype=np.complex128)
    k = 0
    for r in range(ny):
        for c in range(nx):
            if not active[r, c]:
                continue
            p = index[r, c]
            rows[k] = p
            cols[k] = p
            vals[k] = 4.0 * inv_h2
            k += 1
            for d in range(4):
                rn = r
                cn = c
                f = 1.0 + 0.0j
                ok = True
                if d == 0:
                    cn = c + 1
                    if cn == nx:
                        if wrap1:
                            cn = 0
                            f = phase1
                        elif neumann[RIGHT]:
                            cn = nx - 2
                        else:
                            ok = False
                elif d == 1:
                    cn = c - 1
                    if cn < 0:
                        if wrap1:
                            cn = nx - 1
                            f = np.conj(phase1)
                        elif neumann[LEFT]:
                            cn = 1
                        else:
                            ok = False
                elif d == 2:
                    rn = r + 1
                    if rn == ny:
                        if wrap2:
                            rn = 0
                            f = phase2
                        elif neumann[TOP]:
                            rn = ny - 2
                        else:
                            ok = False
                else:
                    rn = r - 1
                    if rn < 0:
                        if wrap2:
                            rn = ny - 1
                            f = np.conj(phase2)
                        elif neumann[BOTTOM]:
                            rn = 1
                        else:
                            ok = False
                if ok and active[rn, cn]:
                    rows[k] = p
                    cols[k] = index[rn, cn]
                    vals[k] = -f * inv_h2
                    k += 1
    return rows[:k], cols[:k], vals[:k]


def _stencil_numpy(active, index, wrap1, wrap2, phase1, phase2, neumann, inv_h2):
    ny, nx = active.shape
    rr, cc = np.nonzero(active)
    p = index[rr, cc]
    out_r = [p]
    out_c = [p]
    out_v = [np.full(p.shape, 4.0 * inv_h2, dtype=np.complex128)]

    def emit(rn, cn, f, ok):
        ok = ok.copy()
        ok[ok] = active[rn[ok], cn[ok]]
        out_r.append(p[ok])
        out_c.append(index[rn[ok], cn[ok]])
        out_v.append(-(np.broadcast_to(f, ok.shape)[ok]) * inv_h2)

    def axis_moves(pos, n, wrap, phase, lo_neumann, hi_neumann):
        moves = []
        for step in (1, -1):
            nb = pos + step
            f = np.ones(pos.shape, dtype=np.complex128)
            ok = np.ones(pos.shape, dtype=bool)
            hi = nb == n
            lo = nb < 0
            if wrap:
                f[hi] = phase
                f[lo] = np.conj(phase)
                nb = np.where(hi, 0, np.where(lo, n - 1, nb))
            else:
                nb = np.where(hi & hi_neumann, n - 2, nb)
                nb = np.where(lo & lo_neumann, 1, nb)
                if not hi_neumann:
                    ok &= ~hi
                if not lo_neumann:
                    ok &= ~lo
                nb = np.clip(nb, 0, n - 1)
            moves.append((nb, f, ok))
        return moves

    for cn, f, ok in axis_moves(cc, nx, wrap1, phase1, bool(neumann[LEFT]), bool(neumann[RIGHT])):
        emit(rr, cn, f, ok)
    for rn, f, ok in axis_moves(rr, ny, wrap2, phase2, bool(neumann[BOTTOM]), bool(neumann[TOP])):
        emit(rn, cc, f, ok)
    return (
        np.concatenate(out_r).astype(np.int64),
        np.concatenate(out_c).astype(np.int64),
        np.concatenate(out_v).astype(np.complex128),
    )


def stencil_triplets(active, index, wrap1, wrap2, phase1, phase2, neumann, inv_h2, use_numba=None):
    """COO triplets of the phased 5-point negative Laplacian on ``active``.

    Ghost-reflected Neumann sides produce a non-symmetric pattern; the caller
    symmetrises with the trapezoid weights.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    fn = _stencil_numba if use_numba else _stencil_numpy
    return fn(
        np.ascontiguousarray(active, dtype=np.bool_),
        np.ascontiguousarray(index, dtype=np.int64),
        bool(wrap1),
        bool(wrap2),
        complex(phase1),
        complex(phase2),
        np.asarray(neumann, dtype=np.bool_),
        float(inv_h2),
    )


@njit(cache=True)
def _csr_matvec_numba(indptr, indices, data, v):
    n = indptr.shape[0] - 1
    y = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        acc = 0.0 + 0.0j
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * v[indices[jj]]
        y[i] = acc
    return y


def _csr_matvec_numpy(indptr, indices, data, v):
    n = indptr.shape[0] - 1
    prod = data * v[indices]
    row = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(row, weights=prod.real, minlength=n) + 1j * np.bincount(
        row, weights=prod.imag, minlength=n
    )


def csr_matvec(indptr, indices, data, v, use_numba=None):
    if use_numba is None:
        use_numba = USE_NUMBA
    v = np.ascontiguousarray(v, dtype=np.complex128)
    data = np.ascontiguousarray(data, dtype=np.complex128)
    fn = _csr_matvec_numba if use_numba else _csr_matvec_numpy
    return fn(indptr, indices, data, v)
