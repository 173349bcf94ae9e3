import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leaderselect.errors import (
    AllSamplesDisconnected,
    Disconnected,
    DuplicateEdge,
    DuplicateLeader,
    EmptyLeaderSet,
    GraphFormatError,
    NodeOutOfRange,
    NonPositiveVariance,
    SelfLoop,
)
from leaderselect.graph import (
    LeaderSet,
    build_graph,
    format_graph,
    ground,
    laplacian,
    parse_graph,
    path_graph,
    random_connected_graph,
    read_graph,
    write_graph,
)

from conftest import random_graphs


def test_build_smallest_path(path2):
    assert path2.n == 2 and path2.edges == ((0, 1, 1.0),)


@pytest.mark.parametrize(
    "n, edges, err",
    [
        (3, [(0, 1, 1.0)], Disconnected),
        (3, [(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0)], DuplicateEdge),
        (3, [(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0)], DuplicateEdge),
        (2, [(0, 0, 1.0), (0, 1, 1.0)], SelfLoop),
        (2, [(0, 1, 0.0)], NonPositiveVariance),
        (2, [(0, 1, -1.0)], NonPositiveVariance),
        (2, [(0, 2, 1.0)], NodeOutOfRange),
    ],
)
def test_build_rejects(n, edges, err):
    with pytest.raises(err):
        build_graph(n, edges)


def test_edges_canonicalized():
    g = build_graph(3, [(2, 1, 1.0), (1, 0, 2.0)])
    assert g.edges == ((0, 1, 2.0), (1, 2, 1.0))


def test_laplacian_examples(path2, triangle):
    assert np.array_equal(laplacian(path2), [[1, -1], [-1, 1]])
    lt = laplacian(triangle)
    assert np.all(np.diag(lt) == 2) and np.all(lt[~np.eye(3, dtype=bool)] == -1)
    assert np.array_equal(laplacian(path_graph(2, 0.5)), [[2, -2], [-2, 2]])


def test_laplacian_is_read_only(path2):
    with pytest.raises(ValueError):
        laplacian(path2)[0, 0] = 5


def test_ground_examples(path2, triangle):
    assert np.array_equal(ground(path2, [1]).L_ff, [[1]])
    assert np.array_equal(ground(triangle, [0]).L_ff, [[2, -1], [-1, 2]])
    full = ground(triangle, [0, 1, 2])
    assert full.all_leaders and full.L_ff.shape == (0, 0)


def test_ground_errors(triangle):
    with pytest.raises(EmptyLeaderSet):
        ground(triangle, [])
    with pytest.raises(DuplicateLeader):
        LeaderSet((1, 1))
    with pytest.raises(NodeOutOfRange):
        ground(triangle, [3])


@pytest.mark.parametrize("g", random_graphs(10, seed=3))
def test_laplacian_invariants(g):
    lap = laplacian(g)
    assert np.abs(lap.sum(axis=1)).max() <= 1e-12
    assert np.array_equal(lap, lap.T)
    leaders = [0, g.n - 1]
    gs = ground(g, leaders)
    np.linalg.cholesky(gs.L_ff)
    assert np.array_equal(gs.reassemble(), lap)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_grounded_block_positive_definite(n, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(n, rng)
    s = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    gs = ground(g, s)
    if not gs.all_leaders:
        assert np.linalg.eigvalsh(gs.L_ff)[0] > 0


def test_parse_line_and_json(tmp_path):
    text = "# comment\nn 3\ne 0 1 1.5\ne 1 2 0.5  # trailing\n"
    g = parse_graph(text)
    assert g.edges == ((0, 1, 1.5), (1, 2, 0.5))
    assert parse_graph('{"n": 3, "edges": [[0, 1, 1.5], [1, 2, 0.5]]}').edges == g.edges
    path = tmp_path / "g.txt"
    write_graph(g, path)
    assert read_graph(path).edges == g.edges
    assert parse_graph(format_graph(g)).edges == g.edges


@pytest.mark.parametrize("text", ["e 0 1 1.0\n", "n 2\nn 2\ne 0 1 1\n", "n 2\nx 0 1\n", "n two\n", "{bad json"])
def test_parse_rejects(text):
    with pytest.raises(GraphFormatError):
        parse_graph(text)


def test_scaled_and_relabeled(path3):
    assert path3.scaled(2.0).edges == ((0, 1, 2.0), (1, 2, 2.0))
    with pytest.raises(NonPositiveVariance):
        path3.scaled(0)
    assert path3.relabeled([2, 1, 0]).edges == ((0, 1, 1.0), (1, 2, 1.0))
