import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnnchoice import econinfo as ei
from dnnchoice.autodiff import analytic_linear_jacobian
from dnnchoice.data import AltAttributes, Standardizer
from dnnchoice.network import ModelParameters, probabilities

from conftest import as_model, random_params


def linear(w, b=None, std=None):
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    b = np.zeros(w.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
    return as_model(ModelParameters((w,), (b,)), std)


BINARY = linear([[0.0], [1.0]])  # s = (0.25, 0.75) at x = ln 3


# -- predictions, shares, substitution ----------------------------------------

def test_predict_examples():
    assert ei.predict(linear(np.zeros((3, 1)), np.log([0.1, 0.7, 0.2])), [0.0]) == 1
    assert ei.predict(linear(np.zeros((2, 1))), [5.0]) == 0
    assert ei.predict(BINARY, [math.log(3)]) == 1


def test_predict_shift_invariance(rng):
    for _ in range(200):
        K, d = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        w, b = rng.normal(size=(K, d)), rng.normal(size=K)
        x = rng.normal(size=(10, d))
        shifted = linear(w, b + rng.normal() * 100)
        np.testing.assert_array_equal(ei.predict(linear(w, b), x), ei.predict(shifted, x))


def test_market_share_examples():
    np.testing.assert_allclose(ei.market_share(linear(np.zeros((5, 2))), np.ones((7, 2))), 0.2, atol=1e-15)
    m = BINARY
    x = np.array([[math.log(3)]])
    np.testing.assert_array_equal(ei.market_share(m, x), m.probabilities(x)[0])
    # s = (1, 0) and (0, 1) up to underflow
    far = linear([[0.0], [1000.0]])
    np.testing.assert_allclose(ei.market_share(far, [[-1.0], [1.0]]), [0.5, 0.5], atol=1e-15)
    with pytest.raises(ValueError):
        ei.market_share(m, np.zeros((0, 1)))


def test_market_share_is_mean_of_probabilities(rng):
    for _ in range(50):
        p = random_params(rng, int(rng.integers(0, 3)), 5, 3, 4)
        m = as_model(p)
        x = rng.normal(size=(30, 3))
        sh = ei.market_share(m, x)
        assert np.array_equal(sh, m.probabilities(x).mean(axis=0))
        assert abs(sh.sum() - 1) <= 1e-10


def test_substitution_examples():
    m = linear(np.zeros((3, 1)), np.log([0.2, 0.4, 0.4]))
    assert ei.substitution_ratio(m, [0.0], 0, 1) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        ei.substitution_ratio(m, [0.0], 1, 1)
    eq = linear(np.zeros((4, 2)))
    assert ei.substitution_ratio(eq, [1.0, 2.0], 3, 0) == 1.0
    with pytest.raises(ei.UndefinedError):
        ei.substitution_ratio(linear([[0.0], [1.0]]), [1e4], 1, 0)


# -- slice curves ---------------------------------------------------------------

def test_slice_curve_linear_matches_softmax(rng):
    w, b = rng.normal(size=(3, 4)), rng.normal(size=3)
    x = rng.normal(size=(50, 4))
    grid = np.linspace(-3, 3, 25)
    c = ei.slice_curve(linear(w, b), x, 2, grid)
    pts = np.repeat(x.mean(axis=0)[None], 25, axis=0)
    pts[:, 2] = grid
    assert np.abs(c.ensemble_mean - probabilities(pts @ w.T + b)).max() <= 1e-10
    np.testing.assert_array_equal(c.ensemble_mean, c.per_model_probs[0])


def test_slice_curve_flat_for_zero_model():
    c = ei.slice_curve(linear(np.zeros((4, 2))), np.ones((3, 2)), 0, [0.0, 1.0, 5.0])
    np.testing.assert_allclose(c.ensemble_mean, 0.25, atol=1e-15)


def test_slice_curve_ensemble_mean_exact(rng):
    models = [as_model(random_params(rng, 2, 4, 3, 3)) for _ in range(4)]
    x, grid = rng.normal(size=(20, 3)), np.linspace(-1, 1, 9)
    c = ei.slice_curve(models, x, 1, grid)
    separate = [ei.slice_curve(m, x, 1, grid).ensemble_mean for m in models]
    assert np.array_equal(c.ensemble_mean, np.stack(separate).mean(axis=0))


def test_slice_curve_validation():
    with pytest.raises(ValueError):
        ei.slice_curve(BINARY, [[0.0]], 0, [1.0, 0.0])
    with pytest.raises(ValueError):
        ei.slice_curve(BINARY, [[0.0]], 3, [0.0])


# -- alpha and welfare ----------------------------------------------------------

AMAP = {0: AltAttributes(cost=0), 1: AltAttributes(cost=1)}


def test_alpha_examples():
    m = linear([[-0.1, 0.0], [0.0, 0.0]])
    assert ei.marginal_utility_alpha(m, [1.0, 2.0], 0, AMAP) == pytest.approx(0.1, abs=1e-15)
    assert ei.marginal_utility_alpha(m, [1.0, 2.0], 1, AMAP) == 0.0
    m3 = linear([[-0.3, 0.0], [0.0, 0.0]])
    assert ei.marginal_utility_alpha([m, m3], [1.0, 2.0], 0, AMAP) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(KeyError):
        ei.marginal_utility_alpha(m, [1.0, 2.0], 1, {0: AltAttributes(cost=0)})


def test_alpha_through_standardizer():
    std = Standardizer(np.array([3.0, -1.0]), np.array([4.0, 0.5]))
    # weights act on standardized inputs: -0.4 per std unit of 4 = -0.1 per currency unit
    m = linear([[-0.4, 0.0], [0.0, 0.0]], std=std)
    assert ei.marginal_utility_alpha(m, [1.0, 2.0], 0, AMAP) == pytest.approx(0.1, abs=1e-15)


def test_individual_alpha_nan_without_cost():
    m = linear([[-0.1, 0.0], [0.0, 0.0]], [5.0, 0.0])
    a = ei.individual_alphas(m, np.zeros((2, 2)), {0: AltAttributes(cost=0), 1: AltAttributes()})
    np.testing.assert_allclose(a, 0.1)
    m2 = linear([[-0.1, 0.0], [0.0, 0.0]], [0.0, 5.0])
    assert np.isnan(ei.individual_alphas(m2, np.zeros((2, 2)), {0: AltAttributes(cost=0)})).all()


def test_welfare_examples():
    r = ei.welfare_from_utilities([[0.0]], [[3.0]], [2.0])
    assert r.per_individual_delta[0] == pytest.approx(1.5, abs=1e-15)
    r = ei.welfare_from_utilities([[0.0, 0.0]], [[math.log(2), math.log(2)]], [1.0])
    assert r.per_individual_delta[0] == pytest.approx(math.log(2), abs=1e-15)
    assert r.total_delta == r.per_individual_delta[0]


def test_welfare_excludes_nonpositive_alpha():
    r = ei.welfare_from_utilities(np.zeros((3, 2)), np.ones((3, 2)), [1.0, 0.0, np.nan])
    assert list(r.excluded) == [1, 2]
    assert r.total_delta == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ei.welfare_from_utilities(np.zeros((1, 2)), np.ones((1, 2)), [-1.0])


def test_welfare_zero_law(rng):
    for _ in range(20):
        m = as_model(random_params(rng, 2, 5, 3, 3))
        x = rng.normal(size=(15, 3))
        sc = [ei.Edit(0, "add", float(rng.normal()))]
        r = ei.welfare_change(m, x, sc, sc, np.full(15, 0.5))
        assert np.all(r.per_individual_delta == 0.0) and r.total_delta == 0.0


def test_welfare_cost_decrease_positive(rng):
    for _ in range(20):
        w = rng.normal(size=(3, 3))
        w[:, 0] = 0.0
        w[1, 0] = -rng.uniform(0.05, 1.0)  # feature 0 is alt 1's own cost
        m = linear(w, rng.normal(size=3))
        x = rng.normal(size=(25, 3))
        alphas = np.full(25, abs(w[1, 0]))
        r = ei.welfare_change(m, x, [], [ei.Edit(0, "add", -1.0)], alphas)
        assert r.total_delta > 0
        assert r.total_delta == pytest.approx(np.nansum(r.per_individual_delta), rel=1e-9)


def test_shared_cost_can_lower_welfare_despite_positive_alpha():
    # cost of alt 0 also raises V_1, so the log-sum falls when it drops
    m = linear([[-0.1], [0.5]])
    x = np.array([[10.0]])
    alphas = ei.marginal_utility_alpha(m, x, np.array([0]), {0: AltAttributes(cost=0)})
    assert alphas[0] == pytest.approx(0.1)
    r = ei.welfare_change(m, x, [], [ei.Edit(0, "add", -1.0)], alphas)
    assert r.total_delta < 0
    # the log-sum change over alpha, computed by hand
    lse = lambda c: np.logaddexp(-0.1 * c, 0.5 * c)
    assert r.total_delta == pytest.approx((lse(9.0) - lse(10.0)) / 0.1, rel=1e-12)


def test_apply_scenario():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = ei.apply_scenario(x, [ei.Edit(0, "set", 9.0), ei.Edit(1, "add", -1.0)])
    np.testing.assert_array_equal(out, [[9.0, 1.0], [9.0, 3.0]])
    np.testing.assert_array_equal(x, [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ValueError):
        ei.Edit(0, "scale", 2.0)


# -- derivatives, elasticities, VOT --------------------------------------------

def test_elasticity_examples():
    assert ei.elasticity(BINARY, [math.log(3)], 1, 0) == pytest.approx(0.25 * math.log(3), abs=1e-15)
    assert ei.elasticity(linear([[0.0, 1.0], [1.0, 2.0]]), [0.0, 1.0], 1, 0) == 0.0
    assert ei.elasticity(linear([[0.0, 1.0], [0.0, 2.0]]), [3.0, 1.0], 0, 0) == 0.0
    with pytest.raises(ei.UndefinedError):
        ei.elasticity(linear([[0.0], [1.0]]), [100.0], 0, 0)


def test_elasticity_linear_chain(rng):
    for _ in range(200):
        K, d = int(rng.integers(2, 5)), int(rng.integers(1, 5))
        w, b = rng.normal(size=(K, d)), rng.normal(size=K)
        x = rng.normal(size=d)
        s = probabilities(w @ x + b)
        via_oracle = analytic_linear_jacobian(w, x, b) * x[None, :] / s[:, None]
        assert np.abs(ei.elasticities(linear(w, b), x)[0] - via_oracle).max() <= 1e-9


def test_elasticity_table_aggregation():
    # elasticity of alt 1 w.r.t. x is s0 * b * x; with bias -b*x, s0 = 1/2
    m1 = linear([[0.0], [0.5]], [0.0, -2.0])
    m3 = linear([[0.0], [1.5]], [0.0, -6.0])
    t = ei.elasticity_table([m1, m3], [[4.0]], ["x"], ["a", "b"])
    assert t.mean.shape == t.std.shape == (1, 2)
    assert t.mean[0, 1] == pytest.approx(2.0, abs=1e-12)
    assert t.std[0, 1] == pytest.approx(1.0, abs=1e-12)
    one = ei.elasticity_table(m1, np.random.default_rng(0).normal(size=(10, 1)))
    assert np.all(one.std == 0)


def test_elasticity_table_counts_undefined():
    t = ei.elasticity_table(linear([[0.0], [1.0]]), [[100.0], [0.5]])
    assert t.undefined == 1
    assert np.all(np.isfinite(t.mean))


def test_vot_example():
    # binary, alt 1 carries time (-0.02/min) and cost (-0.10/currency), alt 1 predicted
    m = linear([[0.0, 0.0], [-0.02, -0.10]], [0.0, 3.0])
    x = [1.0, 1.0]
    assert ei.vot(m, x, 0, 1) == pytest.approx(0.2, rel=1e-12)
    assert ei.mrs(m, x, 0, 1) == pytest.approx(-0.2, rel=1e-12)
    st_ = ei.vot_stats(m, [x], 0, 1, scale=60)
    assert st_.median == pytest.approx(12.0, rel=1e-12)
    assert ei.vot(linear([[0.0, 0.0], [-1.0, -1.0]]), x, 0, 1) == pytest.approx(1.0)
    with pytest.raises(ei.UndefinedError):
        ei.vot(linear([[0.0, 0.0], [-1.0, 0.0]]), x, 0, 1)


def test_vot_summary():
    s = ei.summarize_vot([1.0, 2.0, 3.0], "per-training")
    assert s.median == 2.0 and s.share_negative == 0.0 and s.share_undefined == 0.0
    s = ei.summarize_vot([-4.0] * 5, "per-individual")
    assert s.median == -4.0 and s.share_negative == 1.0
    s = ei.summarize_vot([1.0, np.nan, -1.0, 5.0], "per-individual")
    assert s.share_undefined == 0.25 and s.median == 1.0 and s.share_negative == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        ei.vot_stats(BINARY, [[1.0]], 0, 0, mode="pooled")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_linear_vot_constant_for_owned_attributes(seed):
    # time and cost enter only their owner's utility: every alternative's
    # probability derivative ratio reduces to the owner's w_time / w_cost
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 5))
    w = rng.normal(size=(K, 4))
    owner = int(rng.integers(K))
    w[:, :2] = 0.0
    w[owner, 0] = -rng.uniform(0.1, 1.0)
    w[owner, 1] = -rng.uniform(0.1, 1.0)
    m = linear(w, rng.normal(size=K))
    v = ei.vot_values(m, rng.normal(size=(40, 4)), 0, 1)
    assert np.abs(v - w[owner, 0] / w[owner, 1]).max() <= 1e-9


def test_linear_binary_vot_constant(rng):
    for _ in range(50):
        w = rng.normal(size=(2, 3))
        v = ei.vot_values(linear(w), rng.normal(size=(30, 3)), 0, 2)
        ref = (w[1, 0] - w[0, 0]) / (w[1, 2] - w[0, 2])
        assert np.abs(v - ref).max() <= 1e-9 * max(1.0, abs(ref))


def test_vot_per_training_mode(rng):
    models = [linear([[0.0, 0.0], [-c, -1.0]], [0.0, 2.0]) for c in (0.1, 0.2, 0.3)]
    s = ei.vot_stats(models, rng.normal(size=(10, 2)), 0, 1, mode="per-training", scale=60)
    np.testing.assert_allclose(s.values, [6.0, 12.0, 18.0])
    assert s.median == pytest.approx(12.0)


def test_ensemble_permutation_invariance(rng):
    models = [as_model(random_params(rng, 1, 6, 3, 3)) for _ in range(5)]
    x = rng.normal(size=(20, 3))
    perm = [models[i] for i in rng.permutation(5)]
    np.testing.assert_allclose(ei.market_share(models, x), ei.market_share(perm, x), atol=1e-15)
    a, b = ei.elasticity_table(models, x), ei.elasticity_table(perm, x)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
    np.testing.assert_allclose(a.std, b.std, atol=1e-12)
    np.testing.assert_allclose(ei.slice_curve(models, x, 0, [0.0, 1.0]).ensemble_mean,
                               ei.slice_curve(perm, x, 0, [0.0, 1.0]).ensemble_mean, atol=1e-15)


def test_probability_sum_guard():
    with pytest.raises(ValueError):
        ei._checked(np.array([[0.5, 0.6]]))
