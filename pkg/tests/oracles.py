"""Independent numerical oracles: central finite differences over plain forward passes."""

import numpy as np

from dnnchoice.network import ModelParameters, forward, probabilities


def ref_loss(params, x, y, l1=0.0, l2=0.0):
    v, _ = forward(params, x)
    m = v.max(axis=1, keepdims=True)
    logp = v - m - np.log(np.exp(v - m).sum(axis=1, keepdims=True))
    pen = sum(l1 * np.abs(w).sum() + l2 * (w ** 2).sum() for w in params.weights)
    return -logp[np.arange(len(y)), y].mean() + pen


def fd_param_gradients(params, x, y, l1=0.0, l2=0.0, h=1e-5):
    arrays = [a.copy() for a in params.arrays()]
    grads = []
    for i, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            up = ref_loss(ModelParameters.from_arrays(arrays), x, y, l1, l2)
            a[idx] = orig - h
            dn = ref_loss(ModelParameters.from_arrays(arrays), x, y, l1, l2)
            a[idx] = orig
            g[idx] = (up - dn) / (2 * h)
        grads.append(g)
    return grads


def fd_input_jacobian(model, x, h=1e-5):
    """K x d, differencing the composed standardize -> forward -> softmax map."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        up = probabilities(forward(model.params, model.standardizer.transform(x + e))[0][0])
        dn = probabilities(forward(model.params, model.standardizer.transform(x - e))[0][0])
        cols.append((up - dn) / (2 * h))
    return np.stack(cols, axis=1)


def rel_err(a, b, abs_floor=1e-8):
    """Elementwise error: relative where values are large, absolute near zero."""
    a, b = np.asarray(a), np.asarray(b)
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.where(diff <= abs_floor, 0.0, diff / np.maximum(scale, 1e-300))
