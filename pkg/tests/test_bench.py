import numpy as np
import pytest

from leaderselect.bench import (
    EXPERIMENTS,
    METHODS,
    DeploymentSpec,
    MobilitySpec,
    baseline_order,
    baseline_select,
    deploy,
    experiment_defaults,
    geometric_graph,
    mobility_trace,
    run_experiment,
)
from leaderselect.errors import CannotConnect, UnknownExperiment, ValidationError
from leaderselect.graph import path_graph


def test_geometric_graph_links():
    pos = np.array([[0.0, 0.0], [100.0, 0.0], [401.0, 0.0]])
    assert geometric_graph(pos, 300, 0.01) is None
    # The range is inclusive.
    assert geometric_graph(np.array([[0.0, 0.0], [300.0, 0.0]]), 300, 0.01).num_edges == 1
    g = geometric_graph(pos[:2], 300, 0.01)
    assert g.edges == ((0, 1, pytest.approx(1.0)),)


def test_deploy_is_connected_and_seeded():
    spec = DeploymentSpec(n=30, seed=4)
    pos_a, g = deploy(spec)
    pos_b, _ = deploy(spec)
    assert np.array_equal(pos_a, pos_b) and g.n == 30
    assert pos_a.min() >= 0 and pos_a.max() <= 1000


def test_cannot_connect():
    with pytest.raises(CannotConnect):
        deploy(DeploymentSpec(n=5, range=1.0, max_retries=3))


def test_baseline_orders():
    deg = np.array([1.0, 3.0, 2.0, 3.0, 1.0])
    assert baseline_order(deg, "max-degree") == [1, 3, 2, 0, 4]
    # Mean degree is 2.
    assert baseline_order(deg, "avg-degree") == [2, 0, 1, 3, 4]
    perm = baseline_order(deg, "random", np.random.default_rng(0))
    assert sorted(perm) == list(range(5))
    with pytest.raises(ValidationError):
        baseline_order(deg, "random")
    with pytest.raises(ValidationError):
        baseline_order(deg, "central")
    assert tuple(baseline_select(path_graph(3), 1, "max-degree")) == (1,)


def test_mobility_trace():
    tr = mobility_trace(MobilitySpec(frames=5, seed=1), DeploymentSpec(n=15, seed=1), details=True)
    assert len(tr.graphs) == 5 and len(tr.edge_changes) == 4
    assert tr.references.shape == (5, 2)
    assert np.all((tr.references >= 0) & (tr.references <= 1000))


def test_unknown_experiment_and_overrides():
    with pytest.raises(UnknownExperiment):
        experiment_defaults("fig9")
    with pytest.raises(ValidationError):
        run_experiment("fig1a", trials=1, n=8, bogus=1)


SMALL = {
    "fig1a": {},
    "fig1b": {},
    "fig2a": {"sizes": [8, 10]},
    "fig2b": {"ps": [0.0, 0.1], "samples": 10, "eval_samples": 10, "k": 2},
    "fig3a": {"ms": [1, 2]},
    "fig3b": {"ms": [1, 2], "samples": 5},
    "fig4": {"k": 2, "mobility": MobilitySpec(frames=6)},
}


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_experiments_run_small(name):
    res = run_experiment(name, trials=2, n=10, seed=1, **SMALL[name])
    assert res.rows and res.to_csv().startswith("experiment,method,x,param,trial,metric,value")
    methods = {r[1] for r in res.rows}
    assert set(METHODS) <= methods
    again = run_experiment(name, trials=2, n=10, seed=1, threads=2, **SMALL[name])
    assert again.rows == res.rows


def test_supermodular_wins_small_fig1b():
    res = run_experiment("fig1b", trials=3, n=30, seed=0)
    tab = res.table()
    for (method, x, param), vals in tab.items():
        if method == "supermodular":
            for other in METHODS[1:]:
                assert np.mean(vals) <= np.mean(tab[(other, x, param)])
