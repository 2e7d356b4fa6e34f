"""Result bundle persistence and plot-data export.

Floats are written with ``repr`` (shortest round-trip form) so files are
byte-stable across runs and reload bit-exactly. Every file carries the config
hash; loading a directory whose files disagree on it fails.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ConfigError
from .strip import trapped_margin

BANDS_CSV = "bands.csv"
DISPERSION_CSV = "dispersion.csv"
FLOQUET_JSON = "floquet.json"
TRAPPED_JSON = "trapped.json"
SUMMARY_JSON = "summary.json"

BANDS_COLUMNS = ("theta1", "theta2", "n", "lambda")
DISPERSION_COLUMNS = ("zeta", "M1", "ess", "trapped", "M2")
PLOT_KINDS = ("band-diagram", "dispersion", "field-heatmap")


class BundleError(ConfigError):
    """Unreadable, inconsistent or incomplete bundle (CLI exit status 2)."""


@dataclass(eq=False)
class FieldGrid:
    values: np.ndarray  # (ny, nx) real, zero at inactive nodes
    active: np.ndarray  # (ny, nx) bool
    h: float
    x0: float
    y0: float


@dataclass(eq=False)
class ResultBundle:
    config_hash: str
    code_version: str
    created: str | None = None
    # (N, 2) phases and (N, k) eigenvalues
    band_thetas: np.ndarray | None = None
    band_values: np.ndarray | None = None
    # columns of dispersion.csv
    dispersion: dict | None = None
    summary: dict = field(default_factory=dict)
    floquet: dict | None = None
    trapped: dict | None = None
    fields: dict = field(default_factory=dict)

    def provenance(self) -> dict:
        return {"config_hash": self.config_hash, "code_version": self.code_version, "generated_at": self.created}


def now_stamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def plain(obj):
    """JSON-ready copy: numpy scalars/arrays to Python, complex to [re, im]."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise BundleError(f"non-finite value {v} cannot be written")
        return v
    return obj


def _write_csv(path: Path, columns, rows, bundle: ResultBundle) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={bundle.config_hash} code_version={bundle.code_version}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    path.write_text(buf.getvalue())


def _read_csv(path: Path):
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise BundleError(f"{path.name}: missing provenance header")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    return meta, header, list(reader)


def _write_json(path: Path, payload: dict, bundle: ResultBundle) -> None:
    doc = {"provenance": bundle.provenance(), **plain(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_field(out: Path, name: str, fg: FieldGrid, bundle: ResultBundle) -> list[Path]:
    grid_path = out / f"{name}.field.txt"
    mask_path = out / f"{name}.mask.txt"
    meta_path = out / f"{name}.field.json"
    grid_path.write_text("\n".join(" ".join(fmt(v) for v in row) for row in fg.values) + "\n")
    mask_path.write_text("\n".join("".join("1" if a else "0" for a in row) for row in fg.active) + "\n")
    meta = {
        "name": name,
        "h": fg.h,
        "x0": fg.x0,
        "y0": fg.y0,
        "nx": fg.values.shape[1],
        "ny": fg.values.shape[0],
        "rows": "x2 ascending",
        "columns": "x1 ascending",
        "mask_file": mask_path.name,
    }
    _write_json(meta_path, meta, bundle)
    return [grid_path, mask_path, meta_path]


def save_bundle(bundle: ResultBundle, out_dir) -> list[Path]:
    """Write every populated section; output order is fixed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if bundle.band_values is not None:
        p = out / BANDS_CSV
        _write_csv(p, BANDS_COLUMNS, band_rows(bundle), bundle)
        written.append(p)
    if bundle.dispersion is not None:
        d = bundle.dispersion
        p = out / DISPERSION_CSV
        _write_csv(p, DISPERSION_COLUMNS, zip(*(d[c] for c in DISPERSION_COLUMNS)), bundle)
        written.append(p)
    if bundle.floquet is not None:
        p = out / FLOQUET_JSON
        _write_json(p, bundle.floquet, bundle)
        written.append(p)
    if bundle.trapped is not None:
        p = out / TRAPPED_JSON
        _write_json(p, bundle.trapped, bundle)
        written.append(p)
    for name in sorted(bundle.fields):
        written += _write_field(out, name, bundle.fields[name], bundle)
    p = out / SUMMARY_JSON
    _write_json(p, bundle.summary, bundle)
    written.append(p)
    return written


def band_rows(bundle: ResultBundle):
    th, vals = bundle.band_thetas, bundle.band_values
    for i in range(vals.shape[0]):
        for n in range(vals.shape[1]):
            yield (float(th[i, 0]), float(th[i, 1]), n + 1, float(vals[i, n]))


def _bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise BundleError(f"bad boolean {s!r}")
    return s == "true"


def load_bundle(directory) -> ResultBundle:
    """Read a bundle directory back and re-validate its recorded invariants."""
    d = Path(directory)
    summary_path = d / SUMMARY_JSON
    if not summary_path.exists():
        raise BundleError(f"{d}: no {SUMMARY_JSON}")
    hashes: dict[str, str] = {}

    def load_json(path):
        doc = json.loads(path.read_text())
        prov = doc.pop("provenance", None)
        if not prov or "config_hash" not in prov:
            raise BundleError(f"{path.name}: missing provenance")
        hashes[path.name] = prov["config_hash"]
        return doc, prov

    summary, prov = load_json(summary_path)
    bundle = ResultBundle(prov["config_hash"], prov["code_version"], prov.get("generated_at"), summary=summary)

    p = d / BANDS_CSV
    if p.exists():
        meta, header, rows = _read_csv(p)
        hashes[p.name] = meta.get("config_hash")
        if tuple(header or ()) != BANDS_COLUMNS:
            raise BundleError(f"{p.name}: unexpected columns {header}")
        k = max(int(r[2]) for r in rows)
        n = len(rows) // k
        th = np.array([[float(r[0]), float(r[1])] for r in rows[::k]])
        vals = np.array([float(r[3]) for r in rows]).reshape(n, k)
        bundle.band_thetas, bundle.band_values = th, vals

    p = d / DISPERSION_CSV
    if p.exists():
        meta, header, rows = _read_csv(p)
        hashes[p.name] = meta.get("config_hash")
        if tuple(header or ()) != DISPERSION_COLUMNS:
            raise BundleError(f"{p.name}: unexpected columns {header}")
        cols = list(zip(*rows)) if rows else [()] * len(DISPERSION_COLUMNS)
        bundle.dispersion = {
            c: [(_bool(v) if c == "trapped" else float(v)) for v in vals] for c, vals in zip(DISPERSION_COLUMNS, cols)
        }

    for name, attr in ((FLOQUET_JSON, "floquet"), (TRAPPED_JSON, "trapped")):
        p = d / name
        if p.exists():
            setattr(bundle, attr, load_json(p)[0])

    for meta_path in sorted(d.glob("*.field.json")):
        meta, _ = load_json(meta_path)
        values = np.loadtxt(d / f"{meta['name']}.field.txt", ndmin=2)
        mask_lines = (d / meta["mask_file"]).read_text().split()
        active = np.array([[c == "1" for c in line] for line in mask_lines], dtype=bool)
        bundle.fields[meta["name"]] = FieldGrid(values, active, meta["h"], meta["x0"], meta["y0"])

    if len(set(hashes.values())) != 1:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(hashes.items()))
        raise BundleError(f"mixed-provenance bundle: {detail}")
    validate_bundle(bundle)
    return bundle


def validate_bundle(bundle: ResultBundle) -> None:
    """Recheck relations between stored quantities."""
    s = bundle.summary
    if bundle.band_values is not None:
        cutoff = float(bundle.band_values[:, 0].min())
        if "cutoff" in s and s["cutoff"] != cutoff:
            raise BundleError(f"cutoff {s['cutoff']} disagrees with bands.csv minimum {cutoff}")
        if np.any(np.diff(bundle.band_values, axis=1) < 0):
            raise BundleError("band eigenvalues are not ascending per sample")
    if bundle.dispersion is not None:
        d = bundle.dispersion
        for z, m1, ess, tr in zip(d["zeta"], d["M1"], d["ess"], d["trapped"]):
            if tr != (m1 < ess - trapped_margin(ess)):
                raise BundleError(f"trapped flag inconsistent at zeta={z}")
        if "M_sharp" in s and "strip" in s:
            expect = math.pi**2 / (s["strip"]["l2"] ** 2 * (2 * s["strip"]["J"]) ** 2)
            if s["M_sharp"] != expect:
                raise BundleError("M_sharp disagrees with the recorded strip geometry")
    for name, fg in bundle.fields.items():
        if fg.values.shape != fg.active.shape:
            raise BundleError(f"field {name}: mask shape {fg.active.shape} != grid {fg.values.shape}")
        if np.any(fg.values[~fg.active] != 0):
            raise BundleError(f"field {name}: nonzero values at inactive nodes")


def export_plot_data(bundle: ResultBundle, kind: str, out_dir, name: str | None = None) -> list[Path]:
    """Long-format CSV (band-diagram, dispersion) or matrix heatmaps (field-heatmap)."""
    out = Path(out_dir)
    if kind not in PLOT_KINDS:
        raise BundleError(f"unknown export kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    if kind == "band-diagram":
        if bundle.band_values is None:
            raise BundleError("bundle has no band structure")
        out.mkdir(parents=True, exist_ok=True)
        p = out / "band_diagram.csv"
        _write_csv(p, BANDS_COLUMNS, band_rows(bundle), bundle)
        return [p]
    if kind == "dispersion":
        if bundle.dispersion is None:
            raise BundleError("bundle has no dispersion curve")
        out.mkdir(parents=True, exist_ok=True)
        p = out / "dispersion_plot.csv"
        d = bundle.dispersion
        _write_csv(p, DISPERSION_COLUMNS, zip(*(d[c] for c in DISPERSION_COLUMNS)), bundle)
        return [p]
    names = sorted(bundle.fields) if name is None else [name]
    if not names or any(n not in bundle.fields for n in names):
        raise BundleError(f"bundle has no field {name!r}" if name else "bundle has no fields")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for n in names:
        written += _write_field(out, n, bundle.fields[n], bundle)
    return written
