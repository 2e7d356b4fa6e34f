from __future__ import annotations

import math

import numpy as np
import pytest

from perfspec.eigensolve import (
    DenseCapError,
    EigensolveError,
    SolverOptions,
    clusters,
    dense_reference,
    smallest_eigenpairs,
)
from perfspec.geometry import (
    CellSpec,
    GridSpec,
    StripSpec,
    WindowSpec,
    build_cell_mask,
    build_neumann_cell_mask,
    build_strip_mask,
    build_window_mask,
)
from perfspec.operator import BlochParameter, assemble

HOLE = (-0.5, 0.5, -0.5, 0.5)


def test_dirichlet_square_closed_form():
    h = 1 / 32
    # (0,1)^2 as a 1x1 window of a cell with l = 1/2
    cell = CellSpec(0.5, 0.5)
    op = assemble(build_window_mask(WindowSpec(cell, (0, 0), (0, 0)), GridSpec(h)))
    lam = smallest_eigenpairs(op, 1)[0].value
    want = 8 / h**2 * math.sin(math.pi * h / 2) ** 2
    assert lam == pytest.approx(want, rel=1e-10)
    assert lam == pytest.approx(19.723, abs=1e-3)
    assert abs(lam - 2 * math.pi**2) < 0.05


def test_periodic_zero_mode_constant():
    op = assemble(build_cell_mask(CellSpec(1, 1), GridSpec(0.25)))
    p = smallest_eigenpairs(op, 1)[0]
    assert abs(p.value) < 1e-12
    f = p.field
    assert np.allclose(f, f[0], atol=1e-9)


def test_ref1_matches_dense():
    op = assemble(build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(1 / 8)))
    assert op.dimension == 175
    ref = dense_reference(op)
    pairs = smallest_eigenpairs(op, 6)
    got = np.array([p.value for p in pairs])
    assert np.max(np.abs(got - ref[:6])) <= 1e-10 * ref[5]
    assert pairs[0].value == pytest.approx(ref[0], abs=1e-10)


def test_pairs_sorted_normalised_and_converged():
    g = GridSpec(1 / 8)
    op = assemble(build_cell_mask(CellSpec(1, 1, HOLE), g), BlochParameter(1.0, -2.0))
    pairs = smallest_eigenpairs(op, 5)
    vals = [p.value for p in pairs]
    assert vals == sorted(vals)
    A = op.matrix
    for p in pairs:
        assert p.residual <= 1e-9
        assert g.h**2 * np.sum(np.abs(p.field) ** 2) == pytest.approx(1.0, rel=1e-12)
        r = A @ p.field - p.value * p.field
        assert np.linalg.norm(r) / np.linalg.norm(p.field) <= 1e-8 * op.norm_bound()


def test_neumann_weighted_normalisation():
    g = GridSpec(1 / 4)
    op = assemble(build_neumann_cell_mask(CellSpec(1, 1, HOLE), g), outer="neumann")
    p = smallest_eigenpairs(op, 1)[0]
    assert g.h**2 * np.sum(op.weights * np.abs(p.field) ** 2) == pytest.approx(1.0, rel=1e-12)


def test_degenerate_cluster_resolved():
    # the symmetric cell has a doubly degenerate third/fourth eigenvalue at theta=0
    op = assemble(build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(1 / 8)))
    vals = [p.value for p in smallest_eigenpairs(op, 4)]
    groups = clusters(vals)
    assert [len(g) for g in groups] == [1, 1, 2]
    ref = dense_reference(op)[:4]
    assert np.allclose(vals, ref, rtol=1e-10)


def test_nonconvergence_is_loud():
    op = assemble(build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(1 / 8)))
    with pytest.raises(EigensolveError, match="no convergence"):
        smallest_eigenpairs(op, 3, SolverOptions(tol=1e-30, max_restarts=2))


def test_k_range():
    op = assemble(build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(0.25)))
    with pytest.raises(ValueError):
        smallest_eigenpairs(op, 0)
    with pytest.raises(ValueError):
        smallest_eigenpairs(op, op.dimension)


def test_dense_hand_matrix_and_cap():
    assert np.allclose(dense_reference(np.array([[2.0, -1.0], [-1.0, 2.0]])), [1.0, 3.0])
    op = assemble(build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(1 / 8)))
    with pytest.raises(DenseCapError):
        dense_reference(op, cap=100)


def test_dense_conjugate_phase():
    m = build_cell_mask(CellSpec(1, 1, (-0.25, 0.5, -0.5, 0.25)), GridSpec(1 / 8))
    a = dense_reference(assemble(m, BlochParameter(0.9, -0.4)))
    b = dense_reference(assemble(m, BlochParameter(-0.9, 0.4)))
    assert np.max(np.abs(a - b)) <= 1e-12 * a.max()


def test_oracle_equivalence_random_phases(rng):
    cell = CellSpec(1, 1, (-0.25, 0.5, -0.5, 0.25))
    masks = [
        build_cell_mask(cell, GridSpec(1 / 8)),
        build_strip_mask(StripSpec(cell, 1, 2), GridSpec(1 / 4)),
    ]
    for m in masks:
        for _ in range(20):
            t1, t2 = rng.uniform(-math.pi, math.pi, 2)
            op = assemble(m, BlochParameter(t1, t2 if m.wrap2 else 0.0))
            ref = dense_reference(op)[:6]
            got = np.array([p.value for p in smallest_eigenpairs(op, 6)])
            assert np.max(np.abs(got - ref) / ref) <= 1e-9


def test_hole_never_lowers_ground_state():
    g = GridSpec(1 / 8)
    free = smallest_eigenpairs(assemble(build_cell_mask(CellSpec(1, 1), g)), 1)[0].value
    holed = smallest_eigenpairs(assemble(build_cell_mask(CellSpec(1, 1, HOLE), g)), 1)[0].value
    assert holed > free


def test_continuity_in_theta():
    g = GridSpec(1 / 8)
    m = build_cell_mask(CellSpec(1, 1, HOLE), g)
    ts = np.linspace(-math.pi, math.pi, 41)
    vals = np.array([smallest_eigenpairs(assemble(m, BlochParameter(t, 0.0)), 1)[0].value for t in ts])
    C = np.max(np.abs(np.diff(vals)) / np.diff(ts))
    # first band slope is bounded by the free-space value |theta|/2 at the zone edge
    assert C <= math.pi / 2 + 1e-6


def test_real_and_complex_paths_agree():
    m = build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(1 / 8))
    op = assemble(m)
    v1 = smallest_eigenpairs(op, 3)[0].value
    # a full-period phase of 2*pi is the identity but forces the complex path
    op2 = assemble(m, BlochParameter(math.pi, 0.0))
    op3 = assemble(m, BlochParameter(-math.pi, 0.0))
    assert smallest_eigenpairs(op2, 1)[0].value == pytest.approx(smallest_eigenpairs(op3, 1)[0].value, rel=1e-12)
    assert v1 > 0
