"""Minibatch Adam training of the utility network and repeated seeded trainings."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .autodiff import param_gradients, penalty
from .data import Dataset, SplitIndices, Standardizer, fit_standardizer
from .network import Architecture, ModelParameters, forward, init_glorot, probabilities
from .parallel import run_map

log = logging.getLogger(__name__)

MODEL_FORMAT = "dnnchoice-model"
MODEL_VERSION = 1


class TrainingError(RuntimeError):
    def __init__(self, message: str, seed: int | None = None):
        super().__init__(message if seed is None else f"seed {seed}: {message}")
        self.seed = seed


@dataclass(frozen=True)
class Hyperparameters:
    depth: int = 0
    width: int = 0
    l1: float = 0.0
    l2: float = 0.0
    dropout_rate: float = 0.0
    learn_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    patience: int = 0  # early stopping on validation accuracy; 0 disables

    def __post_init__(self):
        if self.depth < 0 or int(self.depth) != self.depth:
            raise ValueError("depth must be a non-negative integer")
        if self.depth >= 1 and self.width < 1:
            raise ValueError("width must be >= 1 when depth >= 1")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("penalty constants must be non-negative")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if not self.learn_rate > 0:
            raise ValueError("learn_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.depth == 0 and self.width:
            object.__setattr__(self, "width", 0)

    def architecture(self, input_dim: int, n_alts: int) -> Architecture:
        return Architecture(input_dim, n_alts, self.depth, self.width)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "Hyperparameters":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    params: ModelParameters
    standardizer: Standardizer
    hyper: Hyperparameters
    history: tuple[dict, ...] = ()
    val_accuracy: float = float("nan")
    data_fingerprint: str = ""

    @property
    def n_alts(self) -> int:
        return self.params.weights[-1].shape[0]

    def utilities(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        v, _ = forward(self.params, self.standardizer.transform(x))
        return v[0] if x.ndim == 1 else v

    def probabilities(self, x) -> np.ndarray:
        return probabilities(self.utilities(x))

    def predict(self, x) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest index
        return np.argmax(self.probabilities(x), axis=-1)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "tool_version": __version__,
            "architecture": self.params.architecture.to_dict(),
            "layers": [{"weight": w.tolist(), "bias": b.tolist()}
                       for w, b in zip(self.params.weights, self.params.biases)],
            "standardizer": self.standardizer.to_dict(),
            "hyperparameters": self.hyper.to_dict(),
            "provenance": {"seed": self.hyper.seed, "data_fingerprint": self.data_fingerprint,
                           "val_accuracy": self.val_accuracy, "history": list(self.history)},
        }

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n").encode()

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        params = ModelParameters(tuple(np.array(l["weight"], dtype=np.float64).reshape(len(l["bias"]), -1)
                                       for l in d["layers"]),
                                 tuple(np.array(l["bias"], dtype=np.float64) for l in d["layers"]))
        prov = d["provenance"]
        return cls(params, Standardizer.from_dict(d["standardizer"]),
                   Hyperparameters.from_dict(d["hyperparameters"]),
                   tuple(prov["history"]), prov["val_accuracy"], prov["data_fingerprint"])

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Models trained on the same data with the same hyperparameters, ordered by seed."""

    models: tuple[TrainedModel, ...]

    def __post_init__(self):
        models = tuple(sorted(self.models, key=lambda m: m.hyper.seed))
        if not models:
            raise ValueError("an ensemble needs at least one model")
        ref = models[0]
        for m in models[1:]:
            if m.data_fingerprint != ref.data_fingerprint:
                raise ValueError("ensemble members were trained on different data")
            if replace(m.hyper, seed=0) != replace(ref.hyper, seed=0):
                raise ValueError("ensemble members have different hyperparameters")
        object.__setattr__(self, "models", models)

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, i):
        return self.models[i]

    @property
    def hyper(self) -> Hyperparameters:
        return self.models[0].hyper


def as_models(m) -> tuple[TrainedModel, ...]:
    if isinstance(m, TrainedModel):
        return (m,)
    return tuple(m)


# -- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v], self.t)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              inplace: bool = False) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    With ``inplace`` the parameter arrays and moments are overwritten (the
    training loop owns them); otherwise fresh arrays are returned.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("optimizer state does not match the parameters")
    if not inplace:
        params = [p.copy() for p in params]
        state = state.copy()
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


# -- training -----------------------------------------------------------------

def accuracy(model: TrainedModel, data: Dataset, idx=None) -> float:
    if idx is None:
        idx = np.arange(data.n_obs)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty split")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicated split indices")
    return float(np.mean(model.predict(data.features[idx]) == data.choices[idx]))


def _dropout_masks(rng, rate, n, widths):
    keep = 1.0 - rate
    return [(rng.random((n, w)) < keep) / keep for w in widths]


def train(data: Dataset, splits: SplitIndices, hyper: Hyperparameters, standardize: bool = True,
          on_epoch: Callable[[dict], None] | None = None) -> TrainedModel:
    """Fit the network by minibatch Adam on the training split.

    The final (short) batch of each epoch is kept; each batch loss is a
    per-batch mean. Raises ``TrainingError`` when the loss stops being finite.
    """
    train_idx = np.asarray(splits.train)
    if train_idx.size == 0:
        raise TrainingError("empty training split", hyper.seed)
    std = fit_standardizer(data, train_idx) if standardize else Standardizer.identity(data.n_features)
    x_all = std.transform(data.features)
    x_tr, y_tr = x_all[train_idx], data.choices[train_idx]
    x_val, y_val = x_all[splits.val], data.choices[splits.val]

    ss_init, ss_shuffle, ss_drop = np.random.SeedSequence(hyper.seed).spawn(3)
    shuffle_rng = np.random.default_rng(ss_shuffle)
    drop_rng = np.random.default_rng(ss_drop)
    arch = hyper.architecture(data.n_features, data.n_alts)
    params = init_glorot(arch, np.random.default_rng(ss_init))
    arrays = params.arrays()
    state = AdamState.zeros_like(arrays)
    widths = [arch.width] * arch.depth
    fingerprint = data.fingerprint()

    def val_acc(p):
        if len(y_val) == 0:
            return float("nan")
        v, _ = forward(p, x_val)
        return float(np.mean(np.argmax(v, axis=1) == y_val))

    history = []
    best = (-1.0, None)
    stale = 0
    n = len(y_tr)
    for epoch in range(1, hyper.epochs + 1):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, hyper.batch_size):
            b = order[start:start + hyper.batch_size]
            masks = (_dropout_masks(drop_rng, hyper.dropout_rate, len(b), widths)
                     if hyper.dropout_rate > 0 and widths else None)
            lv, grads = param_gradients(params, x_tr[b], y_tr[b], hyper.l1, hyper.l2, masks)
            if not np.isfinite(lv.total):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}; lower learn_rate "
                    f"(currently {hyper.learn_rate:g}) or increase regularization", hyper.seed)
            batch_losses.append(lv.data_term)
            adam_step(arrays, grads.arrays(), state, hyper.learn_rate, inplace=True)
        if not params.is_finite():
            raise TrainingError(f"parameters diverged at epoch {epoch}; lower learn_rate "
                                f"(currently {hyper.learn_rate:g})", hyper.seed)
        pen = penalty(params, hyper.l1, hyper.l2)
        acc = val_acc(params)
        rec = {"epoch": epoch, "data_term": float(np.mean(batch_losses)),
               "penalty_term": pen, "val_accuracy": acc}
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if hyper.patience:
            if acc > best[0]:
                best, stale = (acc, params.copy()), 0
            else:
                stale += 1
                if stale >= hyper.patience:
                    break

    if hyper.patience and best[1] is not None:
        params = best[1]
    return TrainedModel(params, std, hyper, tuple(history), val_acc(params), fingerprint)


def _train_job(job):
    data, splits, hyper, standardize = job
    try:
        return train(data, splits, hyper, standardize)
    except TrainingError as e:
        return e


def repeat_train(data: Dataset, splits: SplitIndices, hyper: Hyperparameters, m: int,
                 seed_base: int = 0, standardize: bool = True, workers: int = 1) -> Ensemble:
    """Train ``m`` models that differ only in their seed (seed_base + i)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    jobs = [(data, splits, replace(hyper, seed=seed_base + i), standardize) for i in range(m)]
    results = run_map(_train_job, jobs, workers)
    failures = [r for r in results if isinstance(r, Exception)]
    if failures:
        raise TrainingError("; ".join(str(f) for f in failures))
    return Ensemble(tuple(results))
