import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnnchoice.data import split, synthesize_mnl
from dnnchoice.hypersearch import (Candidate, SearchSpace, default_space, random_search, sample_configs,
                                   select_best, vc_bound)
from dnnchoice.training import Hyperparameters, TrainingError

TINY = SearchSpace((0, 1, 2), (3, 6), (0.0, 1e-3), (0.0, 1e-2), (0.0, 0.1))
FAST = Hyperparameters(epochs=4, batch_size=64)


@pytest.fixture(scope="module")
def small_data():
    w = np.array([[0.0, 0.0], [1.0, -1.0], [-0.5, 1.5]])
    ds, _ = synthesize_mnl(w, [0.0, 0.1, -0.2], 600, [(-2, 2)] * 2, seed=2)
    return ds, split(ds.n_obs, seed=0)


def test_default_space_lists():
    sp = default_space()
    assert list(sp.depth_choices) == list(range(1, 11))
    assert list(sp.width_choices) == [25, 50, 100, 150, 200]
    assert list(sp.l1_choices) == [0.1, 1e-2, 1e-3, 1e-5, 1e-10, 1e-20]
    assert list(sp.l2_choices) == [0.1, 1e-2, 1e-3, 1e-5, 1e-10, 1e-20]
    assert list(sp.dropout_choices) == [0.01, 1e-5]
    assert sp.cardinality() == 3600


def test_space_validation():
    with pytest.raises(ValueError):
        SearchSpace((), (1,), (0.0,), (0.0,), (0.0,))
    with pytest.raises(ValueError):
        SearchSpace((1,), (1,), (0.0,), (0.0,), (1.0,))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
def test_samples_are_members_and_deterministic(s, seed):
    sp = default_space()
    a = sample_configs(sp, s, seed)
    assert a == sample_configs(sp, s, seed)
    assert len(a) == s
    for h in a:
        assert h.depth in sp.depth_choices and h.width in sp.width_choices
        assert h.l1 in sp.l1_choices and h.l2 in sp.l2_choices
        assert h.dropout_rate in sp.dropout_choices


def test_appending_candidates_keeps_earlier_seeds():
    short, long = sample_configs(default_space(), 5, 9), sample_configs(default_space(), 100, 9)
    assert [h.seed for h in short] == [h.seed for h in long[:5]]
    assert len({h.seed for h in long}) == 100


def test_sample_rejects_zero():
    with pytest.raises(ValueError):
        sample_configs(default_space(), 0, 0)


def test_axes_roughly_uniform():
    hs = sample_configs(default_space(), 5000, 1)
    counts = np.bincount([h.width for h in hs], minlength=201)[[25, 50, 100, 150, 200]]
    # 5 cells of expected 1000: a 4-sigma band per cell
    assert np.all(np.abs(counts - 1000) <= 4 * math.sqrt(1000 * 0.8))


def _cand(i, acc, depth=1, width=10, error=None):
    return Candidate(i, Hyperparameters(depth=depth, width=width), acc, error=error)


def test_select_argmax_injected():
    assert select_best([_cand(0, 0.4), _cand(1, 0.6), _cand(2, 0.5)], 3, 2) == 1


def test_select_tie_breaks():
    # equal accuracy: fewer parameters wins, then lower index
    assert select_best([_cand(0, 0.6, width=20), _cand(1, 0.6, width=5)], 3, 2) == 1
    assert select_best([_cand(0, 0.6), _cand(1, 0.6)], 3, 2) == 0


def test_select_skips_failures():
    cs = [_cand(0, None, error="seed 1: boom"), _cand(1, 0.3)]
    assert select_best(cs, 3, 2) == 1
    with pytest.raises(TrainingError):
        select_best([_cand(0, None, error="x")], 3, 2)


@settings(max_examples=200)
@given(st.lists(st.sampled_from([0.1, 0.2, 0.3, 0.5]), min_size=1, max_size=12))
def test_selected_attains_max(accs):
    cs = [_cand(i, a, width=1 + i % 3) for i, a in enumerate(accs)]
    assert cs[select_best(cs, 3, 2)].val_accuracy == max(accs)


def test_singleton_search(small_data):
    ds, sp = small_data
    res = random_search(ds, sp, TINY, s=1, seed=3, base=FAST)
    assert res.best_index == 0 and len(res.candidates) == 1


def test_search_best_dominates_median_and_is_deterministic(small_data):
    ds, sp = small_data
    a = random_search(ds, sp, TINY, s=6, seed=5, base=FAST)
    b = random_search(ds, sp, TINY, s=6, seed=5, base=FAST)
    accs = [c.val_accuracy for c in a.candidates]
    assert a.best.val_accuracy == max(accs) >= np.median(accs)
    assert a.best_index == b.best_index
    assert [c.model.to_bytes() for c in a.candidates] == [c.model.to_bytes() for c in b.candidates]


def test_search_order_independent(small_data):
    ds, sp = small_data
    serial = random_search(ds, sp, TINY, s=4, seed=8, base=FAST, workers=1)
    par = random_search(ds, sp, TINY, s=4, seed=8, base=FAST, workers=2)
    assert serial.best_index == par.best_index
    assert [c.model.to_bytes() for c in serial.candidates] == [c.model.to_bytes() for c in par.candidates]


def test_search_records_failures(small_data):
    ds, sp = small_data
    space = SearchSpace((3,), (32,), (0.0,), (0.0,), (0.0,))
    with pytest.raises(TrainingError, match="all candidates failed"):
        random_search(ds, sp, space, s=2, seed=0, base=Hyperparameters(learn_rate=1e300, epochs=2))


def test_vc_bound_examples():
    assert vc_bound(2, 1) == 2
    assert vc_bound(1000, 5) == pytest.approx(5000 * math.log2(1000))
    assert round(vc_bound(1000, 5)) == 49829
    with pytest.raises(ValueError):
        vc_bound(1, 1)


@given(st.integers(2, 10 ** 6), st.integers(1, 20))
def test_vc_bound_more_than_doubles(w, L):
    assert vc_bound(2 * w, L) > 2 * vc_bound(w, L)
