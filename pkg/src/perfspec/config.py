"""YAML run configuration, validated before any computation starts."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .bands import BandsError, theta_axis
from .eigensolve import SolverOptions
from .geometry import CellSpec, GeometryError, GridSpec, StripSpec, build_cell_mask, build_strip_mask
from .strip import default_zetas
from .trapped import PerturbedLayout, TrappedError, _check_layout, perturbed_layout


class ConfigError(ValueError):
    """Configuration or usage problem (CLI exit status 2)."""


@dataclass(frozen=True)
class Config:
    cell: CellSpec
    J: int
    K: int
    grid: GridSpec
    band_sampling: tuple[int, int]
    band_count: int
    essential_sampling: int
    zetas: tuple[float, ...]
    group_velocity_zetas: tuple[float, ...]
    fd_step: float
    solver: SolverOptions
    window_J1: int
    window_J2: int
    guide_length: int
    padding: int
    out_dir: str = "results"
    formats: tuple[str, ...] = ("csv", "json")
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def strip(self) -> StripSpec:
        return StripSpec(self.cell, self.J, self.K)

    @property
    def layout(self) -> PerturbedLayout:
        return perturbed_layout(self.cell, self.J, self.window_J1, self.window_J2, self.guide_length, self.padding)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def dispersion_zetas(self) -> list[float]:
        """Configured samples plus finite-difference neighbours of the group-velocity points."""
        z = set(self.zetas)
        for g in self.group_velocity_zetas:
            z.update((g - self.fd_step, g, g + self.fd_step))
        z.add(0.0)
        return sorted(round(v, 15) for v in z)


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class _Lines:
    """Line numbers of mapping keys, for diagnostics."""

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, "")

    def _walk(self, node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}{k.value}"
                self.lines[path] = k.start_mark.line + 1
                self._walk(v, path + ".")

    def where(self, path: str) -> str:
        line = self.lines.get(path)
        return f"line {line}: " if line else ""


_MISSING = object()


class _Reader:
    def __init__(self, data, lines: _Lines, source: str):
        self.data = data
        self.lines = lines
        self.source = source

    def fail(self, path: str, msg: str):
        raise ConfigError(f"{self.source}: {self.lines.where(path)}{path}: {msg}")

    def get(self, path: str, default=_MISSING):
        node = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is _MISSING:
                    self.fail(path, "missing required field")
                return default
            node = node[part]
        return node

    def number(self, path, default=_MISSING, positive=False) -> float:
        v = self.get(path, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, f"expected a number, got {v!r}")
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v}")
        return float(v)

    def integer(self, path, default=_MISSING, minimum=None) -> int:
        v = self.get(path, default)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(path, f"must be >= {minimum}, got {v}")
        return int(v)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<config>") -> Config:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{source}: {where}YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    r = _Reader(data, _Lines(text), source)

    l1 = r.number("geometry.l1", positive=True)
    l2 = r.number("geometry.l2", positive=True)
    hole = r.get("geometry.hole", None)
    if hole is not None:
        if not (isinstance(hole, list) and len(hole) == 4 and all(isinstance(x, (int, float)) for x in hole)):
            r.fail("geometry.hole", "expected [x1min, x1max, x2min, x2max]")
        hole = tuple(float(x) for x in hole)
    J = r.integer("geometry.J", minimum=1)
    K = r.integer("geometry.K", minimum=2)
    h = r.number("grid.h", positive=True)
    try:
        cell = CellSpec(l1, l2, hole)
    except GeometryError as exc:
        r.fail("geometry.hole", str(exc))
    grid = GridSpec(h)
    try:
        build_cell_mask(cell, grid)
        build_strip_mask(StripSpec(cell, J, K), grid)
    except GeometryError as exc:
        r.fail("grid.h", str(exc))

    bs = r.get("sampling.bands", 17)
    if isinstance(bs, int) and not isinstance(bs, bool):
        bs = [bs, bs]
    if not (isinstance(bs, list) and len(bs) == 2 and all(isinstance(x, int) for x in bs)):
        r.fail("sampling.bands", f"expected an integer or [n1, n2], got {bs!r}")
    try:
        theta_axis(bs[0])
        theta_axis(bs[1])
    except BandsError as exc:
        r.fail("sampling.bands", str(exc))
    band_count = r.integer("sampling.band_count", 4, minimum=1)
    ess = r.integer("sampling.essential", 17, minimum=9)
    if ess % 2 == 0:
        r.fail("sampling.essential", "must be odd so that theta2 = 0 is sampled")
    zetas = r.get("sampling.zetas", "default")
    if zetas == "default":
        zetas = default_zetas()
    if not (isinstance(zetas, list) and all(isinstance(z, (int, float)) and not isinstance(z, bool) for z in zetas)):
        r.fail("sampling.zetas", "expected 'default' or a list of phases")
    zetas = [float(z) for z in zetas]
    if 0.0 not in zetas:
        r.fail("sampling.zetas", "must contain 0")
    if any(abs(z) > 3.141592653589793 + 1e-12 for z in zetas):
        r.fail("sampling.zetas", "phases must lie in [-pi, pi]")
    gv = r.get("sampling.group_velocity", [0.3, 0.5, 0.8])
    if not (isinstance(gv, list) and all(isinstance(z, (int, float)) for z in gv)):
        r.fail("sampling.group_velocity", "expected a list of phases")
    fd = r.number("sampling.fd_step", 0.01, positive=True)

    solver = SolverOptions(
        tol=r.number("solver.tol", 1e-9, positive=True),
        max_restarts=r.integer("solver.max_restarts", 50, minimum=1),
        dense_cap=r.integer("solver.dense_cap", 4000, minimum=1),
    )

    J1 = r.integer("geometry.window.J1", 4, minimum=1)
    J2 = r.integer("geometry.window.J2", 4, minimum=1)
    guide = r.integer("geometry.window.guide_length", 6, minimum=4)
    pad = r.integer("geometry.window.padding", 5, minimum=4)
    try:
        _check_layout(perturbed_layout(cell, J, J1, J2, guide, pad))
    except (TrappedError, GeometryError) as exc:
        r.fail("geometry.window", str(exc))

    out_dir = r.get("outputs.directory", "results")
    if not isinstance(out_dir, str):
        r.fail("outputs.directory", "expected a path string")
    formats = r.get("outputs.formats", ["csv", "json"])
    if not (isinstance(formats, list) and set(formats) <= {"csv", "json", "field"}):
        r.fail("outputs.formats", "expected a subset of [csv, json, field]")

    return Config(
        cell=cell,
        J=J,
        K=K,
        grid=grid,
        band_sampling=(bs[0], bs[1]),
        band_count=band_count,
        essential_sampling=ess,
        zetas=tuple(zetas),
        group_velocity_zetas=tuple(float(z) for z in gv),
        fd_step=fd,
        solver=solver,
        window_J1=J1,
        window_J2=J2,
        guide_length=guide,
        padding=pad,
        out_dir=out_dir,
        formats=tuple(formats),
        raw=json.loads(json.dumps(data, default=str)),
    )


def solver_dict(opts: SolverOptions) -> dict:
    return asdict(opts)
