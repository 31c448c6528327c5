"""Frozen fitted constants: JSON map ``name -> {value, note}``."""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

ENV = "NODAL_LAB_CONSTANTS"


def default_path() -> Path:
    return Path(str(resources.files("nodal_lab") / "data" / "constants.json"))


def constants_path(path=None) -> Path:
    if path is not None:
        return Path(path)
    env = os.environ.get(ENV)
    return Path(env) if env else default_path()


def load_constants(path=None) -> dict:
    p = constants_path(path)
    if not p.exists():
        return {}
    data = json.loads(p.read_text())
    for name, entry in data.items():
        if not isinstance(entry, dict) or "value" not in entry or "note" not in entry:
            raise ValueError(f"constant {name!r} needs a value and a note")
    return data


def constant(name: str, path=None) -> float:
    data = load_constants(path)
    if name not in data:
        raise KeyError(f"no frozen constant {name!r} in {constants_path(path)}")
    return float(data[name]["value"])
