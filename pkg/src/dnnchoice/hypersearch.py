"""Random search over depth, width, penalties and dropout."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, SplitIndices
from .parallel import run_map
from .training import Hyperparameters, TrainedModel, TrainingError, train

AXES = ("depth", "width", "l1", "l2", "dropout_rate")


@dataclass(frozen=True)
class SearchSpace:
    depth_choices: tuple[int, ...]
    width_choices: tuple[int, ...]
    l1_choices: tuple[float, ...]
    l2_choices: tuple[float, ...]
    dropout_choices: tuple[float, ...]

    def __post_init__(self):
        for name in ("depth_choices", "width_choices", "l1_choices", "l2_choices", "dropout_choices"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, vals)
        if any(d < 0 for d in self.depth_choices) or any(w < 1 for w in self.width_choices):
            raise ValueError("depths must be >= 0 and widths >= 1")
        if any(v < 0 for v in self.l1_choices + self.l2_choices):
            raise ValueError("penalty constants must be non-negative")
        if any(not 0 <= r < 1 for r in self.dropout_choices):
            raise ValueError("dropout rates must lie in [0, 1)")

    def axes(self):
        return (self.depth_choices, self.width_choices, self.l1_choices,
                self.l2_choices, self.dropout_choices)

    def cardinality(self) -> int:
        return math.prod(len(a) for a in self.axes())

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in zip(
            ("depth_choices", "width_choices", "l1_choices", "l2_choices", "dropout_choices"),
            self.axes())}


def default_space() -> SearchSpace:
    return SearchSpace(
        depth_choices=tuple(range(1, 11)),
        width_choices=(25, 50, 100, 150, 200),
        l1_choices=(0.1, 1e-2, 1e-3, 1e-5, 1e-10, 1e-20),
        l2_choices=(0.1, 1e-2, 1e-3, 1e-5, 1e-10, 1e-20),
        dropout_choices=(0.01, 1e-5),
    )


def candidate_seed(search_seed: int, index: int) -> int:
    # keyed on (seed, index) so appending candidates never changes earlier seeds
    return int(np.random.SeedSequence([search_seed, index]).generate_state(1)[0])


def sample_configs(space: SearchSpace, s: int, seed: int,
                   base: Hyperparameters | None = None) -> list[Hyperparameters]:
    """Draw ``s`` configurations, each axis uniformly and independently.

    Non-searched settings (learning rate, batch size, epochs) come from
    ``base``; each candidate gets its own derived training seed.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    base = base or Hyperparameters()
    rng = np.random.default_rng(seed)
    out = []
    for i in range(s):
        vals = [axis[rng.integers(len(axis))] for axis in space.axes()]
        kw = dict(zip(AXES, vals))
        kw["depth"] = int(kw["depth"])
        kw["width"] = int(kw["width"])
        kw["l1"], kw["l2"], kw["dropout_rate"] = float(kw["l1"]), float(kw["l2"]), float(kw["dropout_rate"])
        out.append(replace(base, seed=candidate_seed(seed, i), **kw))
    return out


@dataclass
class Candidate:
    index: int
    hyper: Hyperparameters
    val_accuracy: float | None
    model: TrainedModel | None = None
    error: str | None = None
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None

    def n_params(self, input_dim: int, n_alts: int) -> int:
        return self.hyper.architecture(input_dim, n_alts).n_params()


@dataclass
class SearchResult:
    candidates: list[Candidate]
    best_index: int
    input_dim: int = 0
    n_alts: int = 0
    failures: list[int] = field(default_factory=list)

    @property
    def best(self) -> Candidate:
        return self.candidates[self.best_index]


def select_best(candidates: list[Candidate], input_dim: int, n_alts: int) -> int:
    """Highest validation accuracy; ties go to fewer parameters, then lower index."""
    ok = [c for c in candidates if c.ok]
    if not ok:
        raise TrainingError("all candidates failed")
    best = min(ok, key=lambda c: (-c.val_accuracy, c.n_params(input_dim, n_alts), c.index))
    return candidates.index(best)


def _run_candidate(job):
    index, data, splits, hyper, standardize = job
    t0 = time.perf_counter()
    try:
        model = train(data, splits, hyper, standardize)
    except TrainingError as e:
        return Candidate(index, hyper, None, None, str(e), time.perf_counter() - t0)
    return Candidate(index, hyper, model.val_accuracy, model, None, time.perf_counter() - t0)


def random_search(data: Dataset, splits: SplitIndices, space: SearchSpace | None = None,
                  s: int = 20, seed: int = 0, base: Hyperparameters | None = None,
                  standardize: bool = True, workers: int = 1) -> SearchResult:
    space = space or default_space()
    configs = sample_configs(space, s, seed, base)
    jobs = [(i, data, splits, h, standardize) for i, h in enumerate(configs)]
    cands = sorted(run_map(_run_candidate, jobs, workers), key=lambda c: c.index)
    best = select_best(cands, data.n_features, data.n_alts)
    return SearchResult(cands, best, data.n_features, data.n_alts,
                        [c.index for c in cands if not c.ok])


def vc_bound(n_weights: int, depth_total: int) -> float:
    """Order-of-magnitude capacity diagnostic W * L * log2(W), constant factor 1."""
    if n_weights < 2 or depth_total < 1:
        raise ValueError("need n_weights >= 2 and depth_total >= 1")
    return n_weights * depth_total * math.log2(n_weights)


VC_BOUND_NOTE = "order-of-magnitude diagnostic: W*L*log2(W) with constant factor 1"
