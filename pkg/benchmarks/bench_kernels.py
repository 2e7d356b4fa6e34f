"""Compare the numba and numpy kernels for stencil assembly and CSR products.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 8 16 32]
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from perfspec import kernels
from perfspec.geometry import CellSpec, GridSpec, StripSpec, build_strip_mask
from perfspec.operator import BlochParameter, assemble


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(n_per_unit: int, repeat: int) -> dict:
    cell = CellSpec(1.0, 1.0, (-0.5, 0.5, -0.5, 0.5))
    mask = build_strip_mask(StripSpec(cell, 2, 6), GridSpec(1.0 / n_per_unit))
    idx = mask.index()
    args = (mask.active, idx, mask.wrap1, mask.wrap2, complex(np.exp(0.5j)), 1.0, np.zeros(4, bool), 1 / mask.h**2)
    A = assemble(mask, BlochParameter(0.5, 0.0)).matrix
    v = np.random.default_rng(0).standard_normal(A.shape[0]) + 0j
    row = {"unknowns": mask.n_active}
    for label, flag in (("numba", True), ("numpy", False)):
        # warm-up triggers compilation for the numba path
        kernels.stencil_triplets(*args, use_numba=flag)
        kernels.csr_matvec(A.indptr, A.indices, A.data, v, use_numba=flag)
        row[f"assemble_{label}_ms"] = 1e3 * best_of(lambda: kernels.stencil_triplets(*args, use_numba=flag), repeat)
        row[f"matvec_{label}_ms"] = 1e3 * best_of(lambda: kernels.csr_matvec(A.indptr, A.indices, A.data, v, use_numba=flag), repeat)
    row["matvec_scipy_ms"] = 1e3 * best_of(lambda: A @ v, repeat)
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32], help="grid nodes per unit length")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    args = ap.parse_args(argv)
    if not kernels.USE_NUMBA:
        print("note: numba unavailable or disabled; the 'numba' column runs interpreted Python")
    rows = [bench(n, args.repeat) for n in args.sizes]
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    hdr = f"{'unknowns':>9} {'asm numba':>10} {'asm numpy':>10} {'mv numba':>9} {'mv numpy':>9} {'mv scipy':>9}  (ms)"
    print(hdr)
    for r in rows:
        print(
            f"{r['unknowns']:>9} {r['assemble_numba_ms']:>10.2f} {r['assemble_numpy_ms']:>10.2f} "
            f"{r['matvec_numba_ms']:>9.3f} {r['matvec_numpy_ms']:>9.3f} {r['matvec_scipy_ms']:>9.3f}"
        )


if __name__ == "__main__":
    main()
