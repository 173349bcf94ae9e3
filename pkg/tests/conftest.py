import numpy as np
import pytest

from leaderselect.graph import build_graph, complete_graph, path_graph, random_connected_graph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path2():
    return path_graph(2)


@pytest.fixture
def path3():
    return path_graph(3)


@pytest.fixture
def triangle():
    return complete_graph(3)


@pytest.fixture
def star3():
    return build_graph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])


def random_graphs(count, n_range=(3, 9), seed=0, **kw):
    rng = np.random.default_rng(seed)
    return [random_connected_graph(int(rng.integers(*n_range)), rng, **kw) for _ in range(count)]
