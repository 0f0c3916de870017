import numpy as np
import pytest

from dnnchoice.data import Standardizer
from dnnchoice.network import Architecture, ModelParameters, forward, init_glorot
from dnnchoice.training import Hyperparameters, TrainedModel

KINK_MARGIN = 1e-4


def random_params(rng, depth, width, d, K, bias_scale=0.3) -> ModelParameters:
    p = init_glorot(Architecture(d, K, depth, width), rng)
    bs = tuple(rng.normal(scale=bias_scale, size=b.shape) for b in p.biases)
    ws = tuple(w * rng.uniform(1.0, 2.5) for w in p.weights)
    return ModelParameters(ws, bs)


def near_kink(params, x, margin=KINK_MARGIN) -> bool:
    _, (_, pre) = forward(params, x)
    return any(np.any(np.abs(z) < margin) for z in pre)


def as_model(params, standardizer=None) -> TrainedModel:
    arch = params.architecture
    std = standardizer or Standardizer.identity(arch.input_dim)
    return TrainedModel(params, std, Hyperparameters(depth=arch.depth, width=arch.width))


def random_net_case(rng, max_depth=3, max_width=8, max_d=6, max_K=4, n=5):
    """Random (params, x, y) with every hidden pre-activation away from 0."""
    while True:
        depth = int(rng.integers(0, max_depth + 1))
        width = int(rng.integers(1, max_width + 1))
        d = int(rng.integers(1, max_d + 1))
        K = int(rng.integers(2, max_K + 1))
        params = random_params(rng, depth, width, d, K)
        x = rng.normal(size=(n, d))
        if not near_kink(params, x):
            return params, x, rng.integers(0, K, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed again at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
