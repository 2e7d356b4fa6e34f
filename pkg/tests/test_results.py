from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from perfspec.config import load_config
from perfspec.pipeline import Pipeline
from perfspec.results import (
    BundleError,
    FieldGrid,
    ResultBundle,
    export_plot_data,
    load_bundle,
    plain,
    save_bundle,
)

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def smoke_bundle():
    return Pipeline(load_config(ROOT / "configs" / "smoke.yaml")).run("all")


def _same(a, b):
    if isinstance(a, dict):
        assert set(a) == set(b)
        for k in a:
            _same(a[k], b[k])
    elif isinstance(a, (list, tuple)):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            _same(x, y)
    else:
        assert a == b and type(a) is type(b), (a, b)


def test_roundtrip_bit_exact(smoke_bundle, tmp_path):
    save_bundle(smoke_bundle, tmp_path)
    back = load_bundle(tmp_path)
    assert back.config_hash == smoke_bundle.config_hash
    assert back.band_thetas.tobytes() == smoke_bundle.band_thetas.tobytes()
    assert back.band_values.tobytes() == smoke_bundle.band_values.tobytes()
    _same(plain(smoke_bundle.dispersion), back.dispersion)
    _same(json.loads(json.dumps(plain(smoke_bundle.summary))), back.summary)
    _same(json.loads(json.dumps(plain(smoke_bundle.floquet))), back.floquet)
    _same(json.loads(json.dumps(plain(smoke_bundle.trapped))), back.trapped)
    for name, fg in smoke_bundle.fields.items():
        got = back.fields[name]
        assert got.values.tobytes() == fg.values.tobytes()
        assert np.array_equal(got.active, fg.active)
        assert (got.h, got.x0, got.y0) == (fg.h, fg.x0, fg.y0)
    # a second save of the reloaded bundle is byte-identical
    out2 = tmp_path / "again"
    save_bundle(back, out2)
    for p in tmp_path.glob("*.csv"):
        assert p.read_bytes() == (out2 / p.name).read_bytes()


def test_every_file_carries_hash(smoke_bundle, tmp_path):
    paths = save_bundle(smoke_bundle, tmp_path)
    h = smoke_bundle.config_hash
    for p in paths:
        text = p.read_text()
        if p.suffix == ".txt" and ".field" not in p.name:
            continue  # mask grids are described by their json sidecar
        if p.name.endswith(".field.txt"):
            sidecar = json.loads(p.with_name(p.name.replace(".txt", ".json")).read_text())
            assert sidecar["provenance"]["config_hash"] == h
        else:
            assert h in text


def test_mixed_provenance_rejected(smoke_bundle, tmp_path):
    save_bundle(smoke_bundle, tmp_path)
    p = tmp_path / "trapped.json"
    doc = json.loads(p.read_text())
    doc["provenance"]["config_hash"] = "0000000000000000"
    p.write_text(json.dumps(doc))
    with pytest.raises(BundleError, match="mixed-provenance"):
        load_bundle(tmp_path)


def test_tampered_values_fail_validation(smoke_bundle, tmp_path):
    save_bundle(smoke_bundle, tmp_path)
    p = tmp_path / "dispersion.csv"
    lines = p.read_text().splitlines()
    cells = lines[2].split(",")
    cells[3] = "false" if cells[3] == "true" else "true"
    lines[2] = ",".join(cells)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(BundleError, match="trapped flag"):
        load_bundle(tmp_path)


def test_missing_summary(tmp_path):
    with pytest.raises(BundleError):
        load_bundle(tmp_path)


def test_csv_uses_shortest_repr(smoke_bundle, tmp_path):
    save_bundle(smoke_bundle, tmp_path)
    rows = (tmp_path / "dispersion.csv").read_text().splitlines()
    assert rows[1] == "zeta,M1,ess,trapped,M2"
    first = rows[2].split(",")
    assert first[1] == repr(smoke_bundle.dispersion["M1"][0])


def test_export_band_diagram(smoke_bundle, tmp_path):
    (p,) = export_plot_data(smoke_bundle, "band-diagram", tmp_path)
    lines = p.read_text().splitlines()
    assert lines[1] == "theta1,theta2,n,lambda"
    n_samples, k = smoke_bundle.band_values.shape
    assert len(lines) - 2 == n_samples * k


def test_export_dispersion_one_row_per_zeta(smoke_bundle, tmp_path):
    (p,) = export_plot_data(smoke_bundle, "dispersion", tmp_path)
    lines = p.read_text().splitlines()
    assert len(lines) - 2 == len(smoke_bundle.dispersion["zeta"])


def test_export_field_heatmap(smoke_bundle, tmp_path):
    paths = export_plot_data(smoke_bundle, "field-heatmap", tmp_path, name="W0")
    grid = np.loadtxt(tmp_path / "W0.field.txt")
    mask = np.array([[c == "1" for c in line] for line in (tmp_path / "W0.mask.txt").read_text().split()])
    meta = json.loads((tmp_path / "W0.field.json").read_text())
    assert grid.shape == mask.shape == (meta["ny"], meta["nx"])
    assert np.all(grid[~mask] == 0)
    assert meta["h"] == 0.25
    assert len(paths) == 3


def test_export_missing_result(tmp_path):
    empty = ResultBundle("abc", "0", None)
    for kind in ("band-diagram", "dispersion", "field-heatmap"):
        with pytest.raises(BundleError):
            export_plot_data(empty, kind, tmp_path)
    with pytest.raises(BundleError):
        export_plot_data(empty, "surface", tmp_path)


def test_field_validation(tmp_path):
    b = ResultBundle("abc", "0", None)
    vals = np.ones((2, 3))
    act = np.array([[True, False, True], [True, True, True]])
    b.fields["bad"] = FieldGrid(vals, act, 0.5, 0.0, 0.0)
    save_bundle(b, tmp_path)
    with pytest.raises(BundleError, match="inactive"):
        load_bundle(tmp_path)


def test_non_finite_rejected():
    with pytest.raises(BundleError):
        plain({"x": float("nan")})
