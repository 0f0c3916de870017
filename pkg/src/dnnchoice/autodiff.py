"""Reverse-mode derivatives of the utility network.

Two products: gradients of the penalized cross-entropy with respect to the
parameters, and Jacobians of the choice probabilities with respect to the
inputs (reported in original feature units through the standardizer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ModelParameters, forward, log_probabilities, probabilities


@dataclass(frozen=True)
class LossValue:
    total: float
    data_term: float
    penalty_term: float


def penalty(params: ModelParameters, l1: float, l2: float) -> float:
    p = 0.0
    for w in params.weights:
        if l1:
            p += l1 * float(np.abs(w).sum())
        if l2:
            p += l2 * float((w * w).sum())
    return p


def _check_batch(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise ValueError("batch must be non-empty with one choice per row")
    return x, y


def loss(params: ModelParameters, x, y, l1: float = 0.0, l2: float = 0.0, masks=None) -> LossValue:
    x, y = _check_batch(x, y)
    v, _ = forward(params, x, masks)
    data = -float(log_probabilities(v)[np.arange(len(y)), y].mean())
    pen = penalty(params, l1, l2)
    return LossValue(data + pen, data, pen)


def param_gradients(params: ModelParameters, x, y, l1: float = 0.0, l2: float = 0.0,
                    masks=None) -> tuple[LossValue, ModelParameters]:
    """Loss and its exact gradient; biases are not penalized, sign(0) = 0 for L1."""
    x, y = _check_batch(x, y)
    n = len(y)
    v, (inputs, pre) = forward(params, x, masks)
    logp = log_probabilities(v)
    data = -float(logp[np.arange(n), y].mean())
    pen = penalty(params, l1, l2)

    dv = np.exp(logp)
    dv[np.arange(n), y] -= 1.0
    dv /= n

    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    delta = dv
    for layer in range(len(params.weights) - 1, -1, -1):
        w = params.weights[layer]
        gw[layer] = delta.T @ inputs[layer]
        gb[layer] = delta.sum(axis=0)
        if l1:
            gw[layer] += l1 * np.sign(w)
        if l2:
            gw[layer] += 2.0 * l2 * w
        if layer:
            dh = delta @ w
            if masks is not None:
                dh = dh * masks[layer - 1]
            delta = dh * (pre[layer - 1] > 0)
    return LossValue(data + pen, data, pen), ModelParameters(tuple(gw), tuple(gb))


def _backprop_to_input(params: ModelParameters, pre, dv) -> np.ndarray:
    delta = dv
    for layer in range(len(params.weights) - 1, 0, -1):
        delta = (delta @ params.weights[layer]) * (pre[layer - 1] > 0)
    return delta @ params.weights[0]


def utility_gradients(params: ModelParameters, x, alt: int, scale=None) -> np.ndarray:
    """d V_alt / d x for a batch (n x d); ``scale`` divides the result per column
    (pass the standardizer stds to convert to original units)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    v, (_, pre) = forward(params, x)
    dv = np.zeros_like(v)
    dv[:, alt] = 1.0
    g = _backprop_to_input(params, pre, dv)
    return g / scale if scale is not None else g


def probability_jacobians(params: ModelParameters, x, scale=None) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities (n x K) and Jacobians (n x K x d), entry [i, k, j] = d s_k / d x_j.

    One backward pass per alternative, each vectorized over the batch.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    v, (_, pre) = forward(params, x)
    s = probabilities(v)
    n, K = s.shape
    jac = np.empty((n, K, x.shape[1]))
    eye = np.eye(K)
    for k in range(K):
        dv = s[:, k:k + 1] * (eye[k] - s)
        jac[:, k, :] = _backprop_to_input(params, pre, dv)
    if scale is not None:
        jac /= np.asarray(scale)
    return s, jac


def input_jacobian(model, x_original) -> np.ndarray:
    """K x d Jacobian of the choice probabilities at one observation, original units."""
    z = model.standardizer.transform(np.asarray(x_original, dtype=np.float64))
    _, jac = probability_jacobians(model.params, z[None, :], model.standardizer.stds)
    return jac[0]


def analytic_linear_jacobian(weights, x, biases=None) -> np.ndarray:
    """Closed form for softmax-of-linear utilities: s_k (w_kj - sum_m s_m w_mj)."""
    w = np.asarray(weights, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    v = w @ x + (0.0 if biases is None else np.asarray(biases))
    s = probabilities(v)
    return s[:, None] * (w - s @ w)
