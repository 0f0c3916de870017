"""Run configuration: YAML document, fixed schema, unknown keys rejected.

Every section is optional; missing keys take the defaults below.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


# name -> (type(s), default); a dict value is a nested section
SCHEMA: dict[str, dict[str, tuple]] = {
    "data": {
        "path": (str, None),
        "schema": (str, None),
        "standardize": (bool, True),
    },
    "synth": {
        "preset": (str, "travel"),
        "n": (int, 2000),
        "seed": (int, 7),
        "features": (list, None),
        "alternatives": (list, None),
        "weights": (list, None),
        "biases": (list, None),
        "attribute_map": (dict, None),
        "interactions": (list, []),
        "thresholds": (list, []),
    },
    "split": {
        "ratios": (list, [0.6, 0.2, 0.2]),
        "seed": (int, 0),
    },
    "train": {
        "depth": (int, 0),
        "width": (int, 0),
        "l1": ((int, float), 0.0),
        "l2": ((int, float), 0.0),
        "dropout_rate": ((int, float), 0.0),
        "learn_rate": ((int, float), 1e-3),
        "batch_size": (int, 128),
        "epochs": (int, 100),
        "seed": (int, 0),
        "patience": (int, 0),
    },
    "search": {
        "s": (int, 20),
        "seed": (int, 0),
        "depth_choices": (list, None),
        "width_choices": (list, None),
        "l1_choices": (list, None),
        "l2_choices": (list, None),
        "dropout_choices": (list, None),
    },
    "repeat": {
        "m": (int, 10),
        "seed_base": (int, 0),
    },
    "econ": {
        "split": (str, "test"),
        "slice_feature": (str, None),
        "slice_grid": ((list, dict), None),
        "scenario0": (list, []),
        "scenario1": (list, None),
        "vot_time": (str, None),
        "vot_cost": (str, None),
        "vot_scale": ((int, float), 60.0),
        "substitution": (list, None),
        "baseline": (bool, True),
    },
    "run": {
        "workers": (int, None),
    },
}


def defaults() -> dict:
    return {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def validate(doc: Any) -> dict:
    """Merge ``doc`` over the defaults, failing on unknown sections/keys or bad types."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping of sections")
    out = defaults()
    for sec, body in doc.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section {sec!r}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be a mapping")
        for key, val in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown config key {sec}.{key}")
            types = SCHEMA[sec][key][0]
            if val is not None and (not isinstance(val, types) or
                                    (isinstance(val, bool) and types in (int, (int, float)))):
                raise ConfigError(f"{sec}.{key} has the wrong type ({type(val).__name__})")
            out[sec][key] = val
    return out


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return validate({})
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing config file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed config: {e}".splitlines()[0]) from None
    return validate(doc)


def schema_text() -> str:
    """Human-readable listing of every accepted key and its default."""
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"{sec}:")
        for k, (t, d) in keys.items():
            tn = "|".join(x.__name__ for x in (t if isinstance(t, tuple) else (t,)))
            lines.append(f"  {k}: {tn} = {d!r}")
    return "\n".join(lines)
