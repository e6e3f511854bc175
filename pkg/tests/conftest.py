import numpy as np
import pytest

from mdep_rmt.tails import TailModel

EXAMPLE_H = [[1.0, 1.0], [-2.0, 2.0]]


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def pareto1():
    return TailModel(alpha=1.0)


def linear_example(alpha=1.0):
    from mdep_rmt.fields import LinearMA

    return LinearMA(EXAMPLE_H, TailModel(alpha=alpha))


def random_symmetric(rng, n):
    x = rng.standard_normal((n, n))
    return (x + x.T) / 2.0
