from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfspec.geometry import (
    CellSpec,
    GeometryError,
    GridSpec,
    StripSpec,
    WindowSpec,
    build_cell_mask,
    build_neumann_cell_mask,
    build_strip_mask,
    build_window_mask,
)

HOLE = (-0.5, 0.5, -0.5, 0.5)


def test_no_hole_cell_all_active():
    m = build_cell_mask(CellSpec(1, 1), GridSpec(0.25))
    assert (m.ny, m.nx) == (8, 8)
    assert m.n_active == 64
    assert m.wrap1 and m.wrap2


def test_holed_cell_eliminates_closed_hole():
    m = build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(0.25))
    assert m.n_active == 64 - 25
    # the inactive block is the 5x5 set of nodes with |x| <= 0.5
    X1, X2 = np.meshgrid(m.x1, m.x2)
    inside = (np.abs(X1) <= 0.5 + 1e-12) & (np.abs(X2) <= 0.5 + 1e-12)
    assert np.array_equal(~m.active, inside)


def test_hole_off_grid_rejected():
    with pytest.raises(GeometryError, match="not on a grid line"):
        build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(1 / 3))


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_incompatible_counts_rejected(h):
    with pytest.raises(GeometryError):
        build_cell_mask(CellSpec(1, 1), GridSpec(h))


def test_too_coarse_rejected():
    with pytest.raises(GeometryError, match="at least 4"):
        GridSpec(1.0).counts(CellSpec(1, 1))


@pytest.mark.parametrize(
    "kwargs",
    [dict(l1=0, l2=1), dict(l1=1, l2=-1), dict(l1=1, l2=1, hole=(-1, 0.5, -0.5, 0.5)), dict(l1=1, l2=1, hole=(0.2, 0.1, 0, 0.5))],
)
def test_cell_invariants(kwargs):
    with pytest.raises(GeometryError):
        CellSpec(**kwargs)


def test_strip_j1_k2():
    cell = CellSpec(1, 1, HOLE)
    m = build_strip_mask(StripSpec(cell, 1, 2), GridSpec(0.25))
    assert (m.nx, m.ny) == (8, 40)
    assert m.wrap1 and not m.wrap2
    assert not m.active[0].any()
    # 4 punched holes of 25 nodes, plus the bottom boundary row
    assert m.n_active == 320 - 8 - 4 * 25
    per_cell = [(~m.active[8 * c + 1 : 8 * c + 8]).sum() for c in range(5)]
    assert per_cell == [25, 25, 0, 25, 25]


def test_strip_j2_middle_cells_hole_free():
    cell = CellSpec(1, 1, HOLE)
    m = build_strip_mask(StripSpec(cell, 2, 2), GridSpec(0.25))
    assert (m.nx, m.ny) == (8, 48)
    assert m.active[16:32].all()


def test_strip_k_minimum():
    with pytest.raises(GeometryError, match="K"):
        StripSpec(CellSpec(1, 1, HOLE), 1, 1)
    with pytest.raises(GeometryError, match="J"):
        StripSpec(CellSpec(1, 1, HOLE), 0, 2)


def test_window_1x1_matches_cell_except_boundary():
    cell = CellSpec(1, 1, HOLE)
    g = GridSpec(0.25)
    w = build_window_mask(WindowSpec(cell, (0, 0), (0, 0)), g)
    c = build_cell_mask(cell, g)
    expect = c.active.copy()
    expect[0, :] = False
    expect[:, 0] = False
    assert np.array_equal(w.active, expect)
    assert not (w.wrap1 or w.wrap2)


def test_window_filled_block_counts():
    cell = CellSpec(1, 1, HOLE)
    filled = {(1, 1), (1, 2), (2, 1), (2, 2)}
    m = build_window_mask(WindowSpec(cell, (0, 3), (0, 3), filled), GridSpec(0.25))
    n_holes = 0
    for a2 in range(4):
        for a1 in range(4):
            block = m.active[8 * a2 + 2 : 8 * a2 + 7, 8 * a1 + 2 : 8 * a1 + 7]
            n_holes += int(not block.any())
            assert block.all() == ((a1, a2) in filled)
    assert n_holes == 12


def test_window_perforated_6x6():
    cell = CellSpec(1, 1, HOLE)
    m = build_window_mask(WindowSpec(cell, (-3, 2), (-3, 2)), GridSpec(0.25))
    assert m.n_active == 48 * 48 - 36 * 25 - (48 + 47)


def test_window_rejects_filled_outside():
    with pytest.raises(GeometryError):
        WindowSpec(CellSpec(1, 1), (0, 1), (0, 1), {(2, 0)})
    with pytest.raises(GeometryError):
        WindowSpec(CellSpec(1, 1), (1, 0), (0, 1))


def test_neumann_mask_closed():
    m = build_neumann_cell_mask(CellSpec(1, 1, HOLE), GridSpec(0.25))
    assert (m.ny, m.nx) == (9, 9)
    assert m.neumann_closed
    assert m.n_active == 81 - 25
    assert m.active[0].all() and m.active[-1].all()


def test_mask_immutable():
    m = build_cell_mask(CellSpec(1, 1, HOLE), GridSpec(0.25))
    with pytest.raises(ValueError):
        m.active[1, 1] = False


def test_index_and_scatter_roundtrip():
    m = build_strip_mask(StripSpec(CellSpec(1, 1, HOLE), 1, 2), GridSpec(0.25))
    idx = m.index()
    assert idx[m.active].tolist() == list(range(m.n_active))
    assert (idx[~m.active] == -1).all()
    v = np.arange(m.n_active, dtype=float) + 1
    assert np.array_equal(m.scatter(v)[m.active], v)


hole_half = st.sampled_from([0.125, 0.25, 0.375, 0.5, 0.625, 0.75])
steps = st.sampled_from([1 / 4, 1 / 8])


@settings(max_examples=25, deadline=None)
@given(a=hole_half, b=hole_half, h=steps, J=st.integers(1, 3), K=st.integers(2, 3))
def test_active_count_formula(a, b, h, J, K):
    cell = CellSpec(1, 1, (-a, a, -b, b))
    g = GridSpec(h)
    try:
        hole = g.hole_nodes(cell)
    except GeometryError:
        return
    n = int(round(2 / h))
    hn = (hole[1] - hole[0] + 1) * (hole[3] - hole[2] + 1)
    assert build_cell_mask(cell, g).n_active == n * n - hn
    s = build_strip_mask(StripSpec(cell, J, K), g)
    assert s.n_active == (2 * K + J) * n * n - 2 * K * hn - n
    w = build_window_mask(WindowSpec(cell, (0, 2), (0, 1)), g)
    assert w.n_active == 6 * n * n - 6 * hn - (3 * n + 2 * n - 1)


@settings(max_examples=15, deadline=None)
@given(a=hole_half, b=hole_half, h=steps)
def test_centred_cell_mirror_symmetric(a, b, h):
    cell = CellSpec(1, 1, (-a, a, -b, b))
    g = GridSpec(h)
    try:
        m = build_cell_mask(cell, g)
    except GeometryError:
        return
    n = m.ny
    mirror = m.active[(n - np.arange(n)) % n]
    assert np.array_equal(mirror, m.active)
    mirror1 = m.active[:, (m.nx - np.arange(m.nx)) % m.nx]
    assert np.array_equal(mirror1, m.active)


def test_strip_symmetric_about_inclusion_midline():
    cell = CellSpec(1, 1, HOLE)
    m = build_strip_mask(StripSpec(cell, 2, 3), GridSpec(0.25))
    full = np.vstack([m.active, np.zeros((1, m.nx), bool)])  # add the implicit top row
    assert np.array_equal(full, full[::-1])
    assert abs(m.x2[0] + m.x2[-1] + m.h) < 1e-12


def test_rebuild_is_bit_identical():
    cell = CellSpec(1, 1, (-0.25, 0.5, -0.5, 0.25))
    g = GridSpec(0.125)
    for build in (lambda: build_cell_mask(cell, g), lambda: build_strip_mask(StripSpec(cell, 2, 3), g)):
        a, b = build(), build()
        assert a.same_grid(b)
        assert a.active.tobytes() == b.active.tobytes()
