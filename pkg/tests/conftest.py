import numpy as np
import pytest

from cate_minimax.data import Dataset
from cate_minimax.nuisance import KnownDensityMeasure, NuisanceFit


def const(value):
    return lambda x: np.full(np.atleast_2d(x).shape[0], float(value))


def uniform_nuisance(frame, pi, outcome, parametrization="mu0"):
    measure = KnownDensityMeasure(frame, const(1.0))
    return NuisanceFit(pi, outcome, parametrization, measure)


def random_dataset(rng, n, d=1):
    return Dataset(rng.random((n, d)), rng.integers(0, 2, n).astype(float), rng.standard_normal(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
