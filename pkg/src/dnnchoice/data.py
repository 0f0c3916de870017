"""Choice datasets: loading, validation, standardization, splitting and synthesis."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class DataError(ValueError):
    pass


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AltAttributes:
    """Which features hold the cost and time attributes of one alternative."""

    cost: int | None = None
    time: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    choices: np.ndarray
    feature_names: tuple[str, ...]
    alt_names: tuple[str, ...]
    attribute_map: Mapping[int, AltAttributes] = field(default_factory=dict)

    def __post_init__(self):
        x = _frozen(self.features, np.float64)
        y = _frozen(self.choices, np.int64)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "choices", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "alt_names", tuple(self.alt_names))
        object.__setattr__(self, "attribute_map", dict(self.attribute_map))

        if x.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if y.shape != (x.shape[0],):
            raise DataError("choices must have one entry per observation")
        if len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length does not match feature columns")
        if len(self.alt_names) < 2:
            raise DataError("need at least two alternatives")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite feature value")
        if y.size and (y.min() < 0 or y.max() >= self.n_alts):
            raise DataError("choice out of range")
        for alt, attrs in self.attribute_map.items():
            if not 0 <= alt < self.n_alts:
                raise DataError(f"attribute_map names unknown alternative {alt}")
            idx = ([attrs.cost] if attrs.cost is not None else []) + list(attrs.time)
            if any(not 0 <= j < self.n_features for j in idx):
                raise DataError(f"attribute_map index out of range for alternative {alt}")
            if attrs.cost is not None and attrs.cost in attrs.time:
                raise DataError(f"cost and time roles overlap for alternative {alt}")

    @property
    def n_obs(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_alts(self) -> int:
        return len(self.alt_names)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def alt_index(self, name: str) -> int:
        try:
            return self.alt_names.index(name)
        except ValueError:
            raise DataError(f"unknown alternative {name!r}") from None

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.choices).tobytes())
        h.update("\x1f".join(self.feature_names + self.alt_names).encode())
        return h.hexdigest()[:16]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.choices[idx], self.feature_names,
                       self.alt_names, self.attribute_map)


# -- schema / file IO ---------------------------------------------------------

def load_schema(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def schema_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".schema.json")


def load_dataset(path, schema: Mapping | str | Path | None = None) -> Dataset:
    """Read a comma-separated file with a header row.

    ``schema`` names the choice column, the alternatives and optionally the
    feature columns and the cost/time roles; when omitted the sidecar
    ``<stem>.schema.json`` next to the data file is used.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    if schema is None:
        schema = schema_path_for(path)
    if not isinstance(schema, Mapping):
        if not Path(schema).exists():
            raise DataError(f"missing schema file: {schema}")
        schema = load_schema(schema)

    choice_col = schema["choice_column"]
    alt_names = list(schema["alt_names"])
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file") from None
        rows = [r for r in reader if r]

    feature_cols = schema.get("feature_columns") or [c for c in header if c != choice_col]
    for c in [choice_col, *feature_cols]:
        if c not in header:
            raise DataError(f"unknown column {c!r}")
    col = {c: i for i, c in enumerate(header)}
    K = len(alt_names)

    x = np.empty((len(rows), len(feature_cols)))
    y = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 1}: expected {len(header)} cells, got {len(row)}")
        raw = row[col[choice_col]].strip()
        try:
            c = int(raw)
        except ValueError:
            raise DataError(f"row {r + 1}: non-integer choice {raw!r}") from None
        if not 0 <= c < K:
            raise DataError(f"row {r + 1}: choice out of range ({c} not in [0, {K}))")
        y[r] = c
        for j, name in enumerate(feature_cols):
            try:
                v = float(row[col[name]])
            except ValueError:
                raise DataError(f"row {r + 1}: non-numeric value in column {name!r}") from None
            if not math.isfinite(v):
                raise DataError(f"row {r + 1}: non-finite value in column {name!r}")
            x[r, j] = v

    attr = parse_attribute_map(schema.get("attribute_map") or {}, feature_cols, alt_names)
    return Dataset(x, y, feature_cols, alt_names, attr)


def parse_attribute_map(spec: Mapping, feature_names: Sequence[str],
                        alt_names: Sequence[str]) -> dict[int, AltAttributes]:
    feature_names, alt_names = list(feature_names), list(alt_names)

    def fidx(name):
        if name not in feature_names:
            raise DataError(f"attribute_map references unknown feature {name!r}")
        return feature_names.index(name)

    out = {}
    for alt, roles in spec.items():
        if alt not in alt_names:
            raise DataError(f"attribute_map references unknown alternative {alt!r}")
        unknown = set(roles) - {"cost", "time"}
        if unknown:
            raise DataError(f"unknown attribute roles {sorted(unknown)}")
        time = roles.get("time") or []
        if isinstance(time, str):
            time = [time]
        cost = roles.get("cost")
        out[alt_names.index(alt)] = AltAttributes(
            cost=fidx(cost) if cost is not None else None,
            time=tuple(fidx(t) for t in time))
    return out


def schema_dict(ds: Dataset, choice_column: str = "choice") -> dict:
    attr = {}
    for k, a in sorted(ds.attribute_map.items()):
        entry = {}
        if a.cost is not None:
            entry["cost"] = ds.feature_names[a.cost]
        if a.time:
            entry["time"] = [ds.feature_names[j] for j in a.time]
        attr[ds.alt_names[k]] = entry
    return {"choice_column": choice_column, "feature_columns": list(ds.feature_names),
            "alt_names": list(ds.alt_names), "attribute_map": attr}


def save_dataset(ds: Dataset, path, choice_column: str = "choice") -> tuple[Path, Path]:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.feature_names, choice_column])
        for row, c in zip(ds.features.tolist(), ds.choices.tolist()):
            w.writerow([repr(v) for v in row] + [c])
    spath = schema_path_for(path)
    with open(spath, "w", encoding="utf-8") as fh:
        json.dump(schema_dict(ds, choice_column), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, spath


# -- splitting ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def get(self, name: str) -> np.ndarray:
        if name not in ("train", "val", "test"):
            raise DataError(f"unknown split {name!r}")
        return getattr(self, name)


def split_sizes(n: int, ratios: Sequence[float] = (0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    r_train, r_val, r_test = ratios
    if min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError("split ratios must be positive and sum to 1")
    n_train = math.floor(r_train * n + 1e-9)
    # round half up; for equal val/test ratios this is round((n - n_train) / 2)
    n_val = math.floor((n - n_train) * r_val / (r_val + r_test) + 0.5)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"n={n} too small to give every split at least one element")
    return n_train, n_val, n_test


def split(n: int, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0) -> SplitIndices:
    if n < 3:
        raise DataError(f"n={n} too small to give every split at least one element")
    n_train, n_val, _ = split_sizes(n, ratios)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])


# -- standardization ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means, np.float64))
        object.__setattr__(self, "stds", _frozen(self.stds, np.float64))
        if np.any(self.stds <= 0):
            raise DataError("standardizer stds must be positive")

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.means) / self.stds

    def inverse_transform(self, z):
        return np.asarray(z, dtype=np.float64) * self.stds + self.means

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(d["means"], d["stds"])


def fit_standardizer(dataset: Dataset, train_idx) -> Standardizer:
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise DataError("empty training index")
    x = dataset.features[train_idx]
    means = x.mean(axis=0)
    stds = x.std(axis=0)  # population convention
    stds = np.where(stds > 0, stds, 1.0)
    return Standardizer(means, stds)


# -- synthesis ----------------------------------------------------------------

@dataclass(frozen=True)
class Interaction:
    alt: int
    features: tuple[int, int]
    coef: float


@dataclass(frozen=True)
class Threshold:
    alt: int
    feature: int
    cut: float
    coef: float


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Generating utilities: linear part plus optional interaction/step terms."""

    weights: np.ndarray
    biases: np.ndarray
    ranges: tuple[tuple[float, float], ...]
    interactions: tuple[Interaction, ...] = ()
    thresholds: tuple[Threshold, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights, np.float64))
        object.__setattr__(self, "biases", _frozen(self.biases, np.float64))
        object.__setattr__(self, "ranges", tuple(tuple(map(float, r)) for r in self.ranges))

    @property
    def is_linear(self) -> bool:
        return not self.interactions and not self.thresholds

    def utilities(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        v = x @ self.weights.T + self.biases
        for t in self.interactions:
            v[:, t.alt] += t.coef * x[:, t.features[0]] * x[:, t.features[1]]
        for t in self.thresholds:
            v[:, t.alt] += t.coef * (x[:, t.feature] > t.cut)
        return v

    def probabilities(self, x) -> np.ndarray:
        v = self.utilities(x)
        v = v - v.max(axis=1, keepdims=True)
        e = np.exp(v)
        return e / e.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "ranges": [list(r) for r in self.ranges],
            "interactions": [{"alt": t.alt, "features": list(t.features), "coef": t.coef}
                             for t in self.interactions],
            "thresholds": [{"alt": t.alt, "feature": t.feature, "cut": t.cut, "coef": t.coef}
                           for t in self.thresholds],
        }

    @classmethod
    def from_dict(cls, d) -> "GroundTruth":
        return cls(np.array(d["weights"]), np.array(d["biases"]), d["ranges"],
                   tuple(Interaction(t["alt"], tuple(t["features"]), t["coef"])
                         for t in d.get("interactions", [])),
                   tuple(Threshold(t["alt"], t["feature"], t["cut"], t["coef"])
                         for t in d.get("thresholds", [])))


def synthesize(truth: GroundTruth, n: int, seed: int,
               feature_names: Sequence[str] | None = None,
               alt_names: Sequence[str] | None = None,
               attribute_map: Mapping[int, AltAttributes] | None = None) -> Dataset:
    if n <= 0:
        raise DataError("n must be positive")
    K, d = truth.weights.shape
    if len(truth.ranges) != d:
        raise DataError("one sampling range per feature required")
    rng = np.random.default_rng(seed)
    lo = np.array([r[0] for r in truth.ranges])
    hi = np.array([r[1] for r in truth.ranges])
    x = lo + (hi - lo) * rng.random((n, d))
    p = truth.probabilities(x)
    # inverse-cdf draw; clip guards the u ~ 1 edge against rounding in cumsum
    u = rng.random(n)
    y = np.minimum((p.cumsum(axis=1) < u[:, None]).sum(axis=1), K - 1)
    return Dataset(x, y,
                   feature_names or [f"x{j}" for j in range(d)],
                   alt_names or [f"alt{k}" for k in range(K)],
                   attribute_map or {})


def synthesize_mnl(weights, biases, n: int, ranges, seed: int, **names) -> tuple[Dataset, GroundTruth]:
    """Draw features uniformly within ``ranges`` and choices from the logit of
    the linear utilities ``weights @ x + biases``."""
    weights = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(weights)):
        raise DataError("true weights must be finite")
    truth = GroundTruth(weights, np.asarray(biases, dtype=np.float64), ranges)
    return synthesize(truth, n, seed, **names), truth

