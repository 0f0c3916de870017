"""Synthetic choice-data specifications with known generating utilities."""

from __future__ import annotations

import numpy as np

from .data import (DataError, Dataset, GroundTruth, Interaction, Threshold,
                   parse_attribute_map, synthesize)

# (name, low, high); times in minutes, costs in currency units
_TRAVEL_FEATURES = [
    ("walk_time", 5, 60),
    ("transit_cost", 1, 20), ("transit_walk_time", 2, 20), ("transit_wait_time", 1, 20),
    ("transit_ivt", 5, 60),
    ("ridehail_cost", 5, 40), ("ridehail_wait_time", 2, 15), ("ridehail_ivt", 5, 45),
    ("drive_cost", 1, 20), ("drive_walk_time", 0, 10), ("drive_ivt", 5, 45),
    ("av_cost", 4, 35), ("av_wait_time", 2, 15), ("av_ivt", 5, 45),
    ("age", 18, 70), ("income", 1, 15),
]
_TRAVEL_ALTS = ["walk", "transit", "ridehail", "drive", "av"]
_TRAVEL_ROLES = {
    "walk": {"time": ["walk_time"]},
    "transit": {"cost": "transit_cost",
                "time": ["transit_walk_time", "transit_wait_time", "transit_ivt"]},
    "ridehail": {"cost": "ridehail_cost", "time": ["ridehail_wait_time", "ridehail_ivt"]},
    "drive": {"cost": "drive_cost", "time": ["drive_walk_time", "drive_ivt"]},
    "av": {"cost": "av_cost", "time": ["av_wait_time", "av_ivt"]},
}
_COST_COEF = -0.12
_TIME_COEF = -0.04  # value of time 1/3 currency per minute = 20 per hour
_TRAVEL_EXTRA = {("ridehail", "income"): 0.08, ("drive", "income"): 0.12,
                 ("av", "income"): 0.06, ("walk", "age"): -0.03, ("av", "age"): -0.02}
_TRAVEL_BIASES = [1.5, 1.2, 1.4, 0.2, 1.6]


def _travel():
    names = [f[0] for f in _TRAVEL_FEATURES]
    w = np.zeros((len(_TRAVEL_ALTS), len(names)))
    for k, alt in enumerate(_TRAVEL_ALTS):
        roles = _TRAVEL_ROLES[alt]
        if "cost" in roles:
            w[k, names.index(roles["cost"])] = _COST_COEF
        for t in roles["time"]:
            w[k, names.index(t)] = _TIME_COEF
    for (alt, feat), c in _TRAVEL_EXTRA.items():
        w[_TRAVEL_ALTS.index(alt), names.index(feat)] = c
    truth = GroundTruth(w, np.array(_TRAVEL_BIASES), [(lo, hi) for _, lo, hi in _TRAVEL_FEATURES])
    return truth, names, list(_TRAVEL_ALTS), _TRAVEL_ROLES


def _nonlinear():
    # three alternatives, four features; alt1 gains from a sign interaction,
    # alt2 from a threshold, neither of which a linear utility can express
    names = ["x0", "x1", "x2", "x3"]
    w = np.array([[0.0, 0.0, 0.0, 0.0],
                  [0.3, 0.0, 0.0, -0.5],
                  [0.0, 0.3, 0.2, 0.0]])
    truth = GroundTruth(w, np.array([0.0, -0.5, -1.0]), [(-1.0, 1.0)] * 4,
                        interactions=(Interaction(1, (0, 1), 5.0),),
                        thresholds=(Threshold(2, 2, 0.3, 3.0),))
    return truth, names, ["a", "b", "c"], {}


PRESETS = {"travel": _travel, "nonlinear": _nonlinear}


def build(spec: dict) -> tuple[Dataset, GroundTruth]:
    """Generate a dataset from the ``synth`` config section.

    Explicit ``features``/``alternatives``/``weights`` override the preset.
    """
    n, seed = spec["n"], spec["seed"]
    if n is None or n <= 0:
        raise DataError("synth.n must be positive")
    if spec.get("weights") is not None:
        feats = spec.get("features")
        alts = spec.get("alternatives")
        if not feats or not alts:
            raise DataError("custom synthetic specs need features and alternatives")
        names = [f["name"] for f in feats]
        ranges = [(float(f["low"]), float(f["high"])) for f in feats]
        w = np.asarray(spec["weights"], dtype=np.float64)
        if w.shape != (len(alts), len(names)):
            raise DataError(f"weights must be {len(alts)} x {len(names)}")
        b = np.asarray(spec.get("biases") or np.zeros(len(alts)), dtype=np.float64)
        truth = GroundTruth(
            w, b, ranges,
            tuple(Interaction(alts.index(t["alt"]), tuple(names.index(f) for f in t["features"]),
                              float(t["coef"])) for t in spec.get("interactions") or []),
            tuple(Threshold(alts.index(t["alt"]), names.index(t["feature"]), float(t["cut"]),
                            float(t["coef"])) for t in spec.get("thresholds") or []))
        roles = spec.get("attribute_map") or {}
    else:
        preset = spec.get("preset") or "travel"
        if preset not in PRESETS:
            raise DataError(f"unknown synthetic preset {preset!r}")
        truth, names, alts, roles = PRESETS[preset]()
    attr = parse_attribute_map(roles, names, alts)
    return synthesize(truth, n, seed, names, alts, attr), truth
