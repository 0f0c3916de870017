"""Economic information from fitted choice models.

Function-based quantities (probabilities, predictions, market shares,
substitution ratios, welfare changes) use the estimated utilities and
probabilities directly. Gradient-based quantities (probability derivatives,
elasticities, marginal rates of substitution, values of time) use input
Jacobians in original feature units. Every function accepts a single
``TrainedModel`` or an ensemble (any iterable of models); aggregation runs
in model order, then observation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .autodiff import probability_jacobians, utility_gradients
from .data import AltAttributes, Dataset
from .network import logsumexp
from .training import TrainedModel, as_models

PROB_TOL = 1e-10
MIN_PROB = 1e-12
MIN_DERIV = 1e-12


class UndefinedError(ArithmeticError):
    """A ratio whose denominator is too close to zero to be meaningful."""


def _x(obj) -> np.ndarray:
    if isinstance(obj, Dataset):
        return obj.features
    return np.atleast_2d(np.asarray(obj, dtype=np.float64))


def _checked(s: np.ndarray) -> np.ndarray:
    if not np.all(np.abs(s.sum(axis=-1) - 1.0) <= PROB_TOL):
        raise ValueError("probability vectors do not sum to one")
    return s


def jacobians(model: TrainedModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities (n x K) and original-unit Jacobians (n x K x d)."""
    z = model.standardizer.transform(_x(x))
    s, jac = probability_jacobians(model.params, z, model.standardizer.stds)
    return _checked(s), jac


# -- function-based -----------------------------------------------------------

def choice_probabilities(models, x) -> np.ndarray:
    """Per-observation probabilities; averaged over models for an ensemble."""
    ms = as_models(models)
    return np.mean([_checked(m.probabilities(_x(x))) for m in ms], axis=0)


def predict(models, x):
    s = choice_probabilities(models, x)
    out = np.argmax(s, axis=-1)
    return int(out[0]) if np.ndim(x) == 1 else out


def market_share(models, x) -> np.ndarray:
    """Mean predicted probability per alternative over the given observations."""
    s = choice_probabilities(models, x)
    if s.shape[0] == 0:
        raise ValueError("empty split")
    return s.mean(axis=0)


def substitution_ratio(models, x, k1: int, k2: int) -> float:
    if k1 == k2:
        raise ValueError("substitution ratio needs two different alternatives")
    s = choice_probabilities(models, np.asarray(x, dtype=np.float64))[0]
    if s[k2] < 1e-300:
        raise UndefinedError("undefined ratio: denominator probability underflows")
    return float(s[k1] / s[k2])


@dataclass
class SliceCurve:
    feature_index: int
    grid: np.ndarray
    per_model_probs: np.ndarray  # M x G x K
    ensemble_mean: np.ndarray    # G x K
    base_point: np.ndarray


def slice_curve(models, x, feature_index: int, grid) -> SliceCurve:
    """Probabilities along ``grid`` for one feature, all others at their sample mean."""
    x = _x(x)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be a non-empty ascending sequence")
    if not 0 <= feature_index < x.shape[1]:
        raise ValueError("feature index out of range")
    base = x.mean(axis=0)
    pts = np.repeat(base[None, :], grid.size, axis=0)
    pts[:, feature_index] = grid
    per_model = np.stack([_checked(m.probabilities(pts)) for m in as_models(models)])
    return SliceCurve(feature_index, grid, per_model, per_model.mean(axis=0), base)


def marginal_utility_alpha(models, x, alt: int, attribute_map: Mapping[int, AltAttributes]) -> np.ndarray | float:
    """Minus the derivative of V_alt with respect to alt's own cost (original units).

    ``alt`` may be a per-observation array. An ensemble returns the mean
    over its models.
    """
    single = np.ndim(x) == 1
    x = _x(x)
    alt = np.broadcast_to(np.asarray(alt), (x.shape[0],))
    cost = {}
    for a in np.unique(alt):
        attrs = attribute_map.get(int(a))
        if attrs is None or attrs.cost is None:
            raise KeyError(f"no cost feature mapped for alternative {int(a)}")
        cost[int(a)] = attrs.cost
    out = np.zeros(x.shape[0])
    ms = as_models(models)
    for m in ms:
        z = m.standardizer.transform(x)
        for a, j in cost.items():
            rows = alt == a
            g = utility_gradients(m.params, z[rows], a, m.standardizer.stds)
            out[rows] -= g[:, j]
    out /= len(ms)
    return float(out[0]) if single else out


def individual_alphas(models, x, attribute_map) -> np.ndarray:
    """Alpha for each observation, taken at its predicted alternative's cost.

    Observations whose predicted alternative has no cost feature get NaN and
    drop out of welfare sums.
    """
    x = _x(x)
    alt = predict(models, x)
    priced = np.array([attribute_map.get(int(a), AltAttributes()).cost is not None for a in alt],
                      dtype=bool)
    out = np.full(x.shape[0], np.nan)
    if priced.any():
        out[priced] = marginal_utility_alpha(models, x[priced], alt[priced], attribute_map)
    return out


@dataclass(frozen=True)
class Edit:
    feature: int
    op: str  # "set" or "add"
    value: float

    def __post_init__(self):
        if self.op not in ("set", "add"):
            raise ValueError(f"unknown scenario op {self.op!r}")


def apply_scenario(x, edits: Sequence[Edit]) -> np.ndarray:
    x = _x(x).copy()
    for e in edits:
        if e.op == "set":
            x[:, e.feature] = e.value
        else:
            x[:, e.feature] += e.value
    return x


@dataclass
class WelfareResult:
    per_individual_delta: np.ndarray  # NaN where excluded
    total_delta: float
    excluded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def welfare_from_utilities(v0, v1, alphas) -> WelfareResult:
    """(logsum(V1) - logsum(V0)) / alpha per individual; alpha <= 0 is excluded."""
    v0, v1 = np.atleast_2d(v0), np.atleast_2d(v1)
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    ok = alphas > 0
    if not ok.any():
        raise ValueError("no individual has a positive marginal utility of income")
    delta = np.full(alphas.shape, np.nan)
    delta[ok] = (logsumexp(v1[ok]) - logsumexp(v0[ok])) / alphas[ok]
    return WelfareResult(delta, float(delta[ok].sum()), np.flatnonzero(~ok))


def welfare_change(models, x, scenario0: Sequence[Edit], scenario1: Sequence[Edit],
                   alphas) -> WelfareResult:
    """Compensating-variation change between two edited versions of ``x``.

    For an ensemble the logsum difference is averaged over models before
    dividing by the shared alphas.
    """
    x0, x1 = apply_scenario(x, scenario0), apply_scenario(x, scenario1)
    ms = as_models(models)
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    ok = alphas > 0
    if not ok.any():
        raise ValueError("no individual has a positive marginal utility of income")
    diff = np.mean([logsumexp(m.utilities(x1)) - logsumexp(m.utilities(x0)) for m in ms], axis=0)
    delta = np.full(alphas.shape, np.nan)
    delta[ok] = diff[ok] / alphas[ok]
    return WelfareResult(delta, float(delta[ok].sum()), np.flatnonzero(~ok))


# -- gradient-based -----------------------------------------------------------

def probability_derivatives(models, x) -> np.ndarray:
    """n x K x d derivatives, averaged over models for an ensemble."""
    return np.mean([jacobians(m, x)[1] for m in as_models(models)], axis=0)


def elasticity(model: TrainedModel, x, k: int, j: int) -> float:
    x = np.asarray(x, dtype=np.float64)
    s, jac = jacobians(model, x)
    if s[0, k] < MIN_PROB:
        raise UndefinedError("choice probability too small for an elasticity")
    return float(jac[0, k, j] * x[j] / s[0, k])


def elasticities(model: TrainedModel, x) -> np.ndarray:
    """n x K x d elasticities; NaN where the probability is below threshold."""
    x = _x(x)
    s, jac = jacobians(model, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = jac * x[:, None, :] / s[:, :, None]
    e[np.broadcast_to((s < MIN_PROB)[:, :, None], e.shape)] = np.nan
    return e


@dataclass
class ElasticityTable:
    mean: np.ndarray  # d x K
    std: np.ndarray   # d x K
    per_model: np.ndarray  # M x d x K
    undefined: int = 0
    feature_names: tuple[str, ...] = ()
    alt_names: tuple[str, ...] = ()


def elasticity_table(models, x, feature_names=(), alt_names=()) -> ElasticityTable:
    """Sample-averaged elasticities per model, then mean and population std across models."""
    per_model, undefined = [], 0
    for m in as_models(models):
        e = elasticities(m, x)
        undefined += int(np.isnan(e).sum())
        per_model.append(np.nanmean(e, axis=0).T)
    pm = np.stack(per_model)
    return ElasticityTable(pm.mean(axis=0), pm.std(axis=0), pm, undefined,
                           tuple(feature_names), tuple(alt_names))


def mrs(model: TrainedModel, x, j1: int, j2: int, k: int | None = None) -> float:
    """Literal marginal rate of substitution -(ds_k/dx_j1)/(ds_k/dx_j2), k defaulting
    to the predicted alternative."""
    s, jac = jacobians(model, np.asarray(x, dtype=np.float64))
    k = int(np.argmax(s[0])) if k is None else k
    if abs(jac[0, k, j2]) < MIN_DERIV:
        raise UndefinedError("undefined rate of substitution: zero denominator derivative")
    return float(-jac[0, k, j1] / jac[0, k, j2])


def vot(model: TrainedModel, x, time_feature: int, cost_feature: int) -> float:
    """(ds/dtime)/(ds/dcost) at the predicted alternative, in currency per time unit.

    Positive when both derivatives share a sign; the literal table form
    carries an extra minus sign (see ``mrs``).
    """
    return -mrs(model, x, time_feature, cost_feature)


def vot_values(model: TrainedModel, x, time_feature: int, cost_feature: int) -> np.ndarray:
    """Per-observation VOT; NaN where the cost derivative is below threshold."""
    s, jac = jacobians(model, x)
    k = np.argmax(s, axis=1)
    rows = np.arange(len(k))
    num, den = jac[rows, k, time_feature], jac[rows, k, cost_feature]
    out = np.full(len(k), np.nan)
    ok = np.abs(den) >= MIN_DERIV
    out[ok] = num[ok] / den[ok]
    return out


@dataclass
class VotStats:
    values: np.ndarray  # per-individual or per-model; NaN = undefined
    mode: str
    median: float
    share_negative: float
    share_undefined: float


def summarize_vot(values, mode: str) -> VotStats:
    values = np.asarray(values, dtype=np.float64)
    defined = values[~np.isnan(values)]
    n = max(values.size, 1)
    med = float(np.median(defined)) if defined.size else float("nan")
    neg = float(np.mean(defined < 0)) if defined.size else 0.0
    return VotStats(values, mode, med, neg, float((values.size - defined.size) / n))


def vot_stats(models, x, time_feature: int, cost_feature: int, mode: str = "per-individual",
              scale: float = 1.0) -> VotStats:
    """VOT distribution summary.

    ``per-individual`` uses the first model only (one value per observation);
    ``per-training`` takes each model's sample median. ``scale`` converts
    units, e.g. 60 for per-minute time features reported per hour.
    """
    ms = as_models(models)
    if mode == "per-individual":
        return summarize_vot(vot_values(ms[0], x, time_feature, cost_feature) * scale, mode)
    if mode == "per-training":
        meds = []
        for m in ms:
            v = vot_values(m, x, time_feature, cost_feature)
            v = v[~np.isnan(v)]
            meds.append(np.median(v) * scale if v.size else np.nan)
        return summarize_vot(meds, mode)
    raise ValueError(f"unknown VOT mode {mode!r}")
