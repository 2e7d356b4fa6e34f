from __future__ import annotations

import numpy as np
import pytest

from perfspec.bands import cell_band_structure, friedrichs_constant
from perfspec.eigensolve import SolverOptions
from perfspec.floquet import jordan_chain
from perfspec.geometry import CellSpec, GridSpec, StripSpec
from perfspec.strip import default_zetas, dispersion_curve
from perfspec.trapped import perturbed_ground_state, perturbed_layout

HOLE = (-0.5, 0.5, -0.5, 0.5)
GV_ZETAS = (0.3, 0.5, 0.8)
FD_STEP = 0.01

# one line per acceptance criterion, printed in the terminal summary
CRITERIA: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> None:
    CRITERIA[n] = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(CRITERIA[n])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])


@pytest.fixture(scope="session")
def ref1_cell() -> CellSpec:
    return CellSpec(1.0, 1.0, HOLE)


@pytest.fixture(scope="session")
def grid8() -> GridSpec:
    return GridSpec(1 / 8)


@pytest.fixture(scope="session")
def ref2_strip(ref1_cell) -> StripSpec:
    return StripSpec(ref1_cell, 2, 6)


@pytest.fixture(scope="session")
def ref1_bands(ref1_cell, grid8):
    return cell_band_structure(ref1_cell, grid8, 17, 4)


@pytest.fixture(scope="session")
def ref1_lambda_star(ref1_cell, grid8):
    return friedrichs_constant(ref1_cell, grid8)


def ref2_zetas() -> list[float]:
    z = set(default_zetas())
    for g in GV_ZETAS:
        for s in (1, -1):
            z.update((s * round(g - FD_STEP, 15), s * g, s * round(g + FD_STEP, 15)))
    return sorted(z)


@pytest.fixture(scope="session")
def ref2_curve(ref2_strip, grid8):
    return dispersion_curve(ref2_strip, grid8, ref2_zetas())


@pytest.fixture(scope="session")
def ref2_chain(ref2_strip, grid8):
    return jordan_chain(ref2_strip, grid8, SolverOptions(tol=1e-11))


@pytest.fixture(scope="session")
def ref3_layout(ref1_cell):
    return perturbed_layout(ref1_cell, 2, 4, 4, guide_length=6, padding=5)


@pytest.fixture(scope="session")
def ref3_pair(ref3_layout, grid8):
    return perturbed_ground_state(ref3_layout, grid8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
