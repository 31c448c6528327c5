import json

import numpy as np
import pytest

from nodal_lab.constants import ENV, constant, load_constants
from nodal_lab.eigen import smallest_eigenpairs
from nodal_lab.grid import assemble_laplacian, build_domain
from nodal_lab.io import dumps, load_bundle, save_bundle, write_csv


def test_bundle_roundtrip(tmp_path):
    d = build_domain("lshape", 17)
    pairs = smallest_eigenpairs(assemble_laplacian(d), 3)
    path = save_bundle(tmp_path / "eig.json", d, pairs)
    data = json.loads(path.read_text())
    assert data["domain_hash"] == d.hash()
    assert [e["phi_file"] for e in data["pairs"]] == ["eig.phi0000.f64", "eig.phi0001.f64", "eig.phi0002.f64"]
    assert (tmp_path / "eig.phi0000.f64").stat().st_size == 8 * d.n_active
    d2, back = load_bundle(path)
    assert d2.hash() == d.hash()
    for a, b in zip(pairs, back):
        assert a.lam == b.lam and a.residual == b.residual and np.array_equal(a.phi, b.phi)


def test_bundle_detects_mismatch(tmp_path):
    d = build_domain("square", 9)
    path = save_bundle(tmp_path / "b.json", d, smallest_eigenpairs(assemble_laplacian(d), 1))
    (tmp_path / "b.grid.json").write_text(build_domain("square", 10).to_json())
    with pytest.raises(ValueError):
        load_bundle(path)


def test_dumps_is_stable():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), float("inf")], "c": np.bool_(True)}
    assert dumps(obj) == dumps(dict(reversed(list(obj.items()))))
    assert json.loads(dumps(obj)) == {"a": [2, "inf"], "b": 1.5, "c": True}


def test_csv_uses_repr(tmp_path):
    write_csv(tmp_path / "t.csv", ["x", "y"], [[0.1, 1], [1 / 3, 2]])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["x,y", "0.1,1", "0.3333333333333333,2"]


def test_packaged_constants_have_provenance():
    data = load_constants()
    for name in ("upper_bound_c", "mazya_c1", "scaling_floor", "capacity_volume_c2", "capacity_volume_c3"):
        assert data[name]["note"]
        assert data[name]["value"] > 0


def test_constants_env_override(tmp_path, monkeypatch):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"upper_bound_c": {"value": 1.25, "note": "test"}}))
    monkeypatch.setenv(ENV, str(f))
    assert constant("upper_bound_c") == 1.25
    with pytest.raises(KeyError):
        constant("mazya_c1")


def test_constants_require_note(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"x": {"value": 1}}))
    with pytest.raises(ValueError):
        load_constants(f)
