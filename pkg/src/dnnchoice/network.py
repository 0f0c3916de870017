"""Utility network: stacked ReLU layers feeding an affine utility layer and a softmax.

Depth 0 is the multinomial logit: a single K x d weight matrix plus K biases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    n_alts: int
    depth: int = 0
    width: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.n_alts < 2:
            raise ValueError("need at least two alternatives")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.depth >= 1 and self.width < 1:
            raise ValueError("width must be >= 1 when depth >= 1")

    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.width] * self.depth + [self.n_alts]

    def n_weights(self) -> int:
        s = self.layer_sizes()
        return sum(a * b for a, b in zip(s[:-1], s[1:]))

    def n_params(self) -> int:
        s = self.layer_sizes()
        return self.n_weights() + sum(s[1:])

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "n_alts": self.n_alts,
                "depth": self.depth, "width": self.width if self.depth else 0}


@dataclass(frozen=True, eq=False)
class ModelParameters:
    """Per-layer weights (out x in) and biases; the last pair produces utilities."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        object.__setattr__(self, "weights", tuple(np.asarray(w, dtype=np.float64) for w in self.weights))
        object.__setattr__(self, "biases", tuple(np.asarray(b, dtype=np.float64) for b in self.biases))
        prev = self.weights[0].shape[1]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or w.shape[1] != prev or b.shape != (w.shape[0],):
                raise ValueError("inconsistent layer shapes")
            prev = w.shape[0]

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    @property
    def architecture(self) -> Architecture:
        w = self.weights
        return Architecture(w[0].shape[1], w[-1].shape[0], self.depth,
                            w[0].shape[0] if self.depth else 0)

    def copy(self) -> "ModelParameters":
        return ModelParameters(tuple(w.copy() for w in self.weights),
                               tuple(b.copy() for b in self.biases))

    def arrays(self) -> list[np.ndarray]:
        """Flat view list in the order W_1, b_1, ..., W_m, b_m (used by the optimizer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "ModelParameters":
        return cls(tuple(arrays[0::2]), tuple(arrays[1::2]))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_glorot(arch: Architecture, seed) -> ModelParameters:
    """Glorot-uniform weights, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = arch.layer_sizes()
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return ModelParameters(tuple(ws), tuple(bs))


def forward(params: ModelParameters, x, masks=None):
    """Batched forward pass.

    Returns ``(v, cache)`` where ``v`` is n x K utilities and ``cache`` holds
    the layer inputs and hidden pre-activations needed by the backward pass.
    ``masks`` (one per hidden layer, already scaled for inverted dropout) is
    only supplied during training.
    """
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[1] != params.weights[0].shape[1]:
        raise ValueError(f"expected {params.weights[0].shape[1]} features, got {h.shape[1]}")
    inputs, pre = [], []
    for layer, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        if masks is not None:
            h = h * masks[layer]
    inputs.append(h)
    v = h @ params.weights[-1].T + params.biases[-1]
    return v, (inputs, pre)


def utilities(params: ModelParameters, x, masks=None) -> np.ndarray:
    """Alternative utilities for one observation (length d) or a batch (n x d)."""
    x = np.asarray(x, dtype=np.float64)
    v, _ = forward(params, x, masks)
    return v[0] if x.ndim == 1 else v


def probabilities(v) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_probabilities(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v - logsumexp(v)[..., None]


def logsumexp(v) -> np.ndarray | float:
    v = np.asarray(v, dtype=np.float64)
    m = v.max(axis=-1)
    out = m + np.log(np.exp(v - m[..., None]).sum(axis=-1))
    return float(out) if out.ndim == 0 else out
