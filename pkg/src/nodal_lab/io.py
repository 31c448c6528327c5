"""Eigenpair bundles and deterministic JSON/CSV writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .eigen import EigenPair
from .grid import GridDomain


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    """Stable JSON text: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def save_bundle(path, d: GridDomain, pairs) -> Path:
    """Write ``path`` (JSON), the grid next to it and one float64 sidecar per pair."""
    path = Path(path)
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    grid_file = f"{stem}.grid.json"
    (path.parent / grid_file).write_text(d.to_json())
    entries = []
    for j, p in enumerate(pairs):
        name = f"{stem}.phi{j:04d}.f64"
        np.asarray(p.phi, dtype="<f8").tofile(path.parent / name)
        entries.append({"lambda": p.lam, "residual": p.residual, "phi_file": name})
    write_json(path, {"domain_hash": d.hash(), "grid_file": grid_file, "pairs": entries})
    return path


def load_bundle(path):
    """Read a bundle written by :func:`save_bundle`; returns ``(domain, pairs)``."""
    path = Path(path)
    data = json.loads(path.read_text())
    d = GridDomain.from_dict(json.loads((path.parent / data["grid_file"]).read_text()))
    if d.hash() != data["domain_hash"]:
        raise ValueError("grid file does not match the bundle's domain hash")
    pairs = []
    for e in data["pairs"]:
        phi = np.fromfile(path.parent / e["phi_file"], dtype="<f8")
        if phi.size != d.n_active:
            raise ValueError(f"{e['phi_file']}: expected {d.n_active} values, found {phi.size}")
        pairs.append(EigenPair(float(e["lambda"]), phi, float(e["residual"])))
    return d, pairs
