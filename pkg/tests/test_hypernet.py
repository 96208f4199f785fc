import copy
import random

import numpy as np
import pytest

from graphgen import cycle, path
from metrograph.diffusion import FlowTable
from metrograph.graph import GraphError, Link, Station, build_graph
from metrograph.hypernet import (
    Hypergraph,
    Layer,
    ModelSpec,
    build_features,
    build_hypergraph,
    forward,
    init_layers,
    loss_and_grads,
    propagation,
    run_experiment,
    train,
)
from metrograph.numerics import NumericalError, Rng, fd_gradient


def random_hypergraph(rng: random.Random) -> Hypergraph:
    n = rng.randint(1, 12)
    edges = [rng.sample(range(n), rng.randint(1, n)) for _ in range(rng.randint(1, 10))]
    covered = {v for e in edges for v in e}
    edges += [[v] for v in range(n) if v not in covered]
    return Hypergraph(n, tuple(tuple(e) for e in edges))


def test_single_link_hypergraph():
    h = build_hypergraph(path(2))
    assert h.hyperedges == ((0, 1),)
    np.testing.assert_allclose(h.theta, [[0.5, 0.5], [0.5, 0.5]])


def test_triangle_pairwise_theta():
    h = Hypergraph(3, ((0, 1), (1, 2), (0, 2)))
    expected = np.array([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])
    np.testing.assert_allclose(h.theta, expected, atol=1e-15)


def test_theta_matches_formula_dense():
    h = random_hypergraph(random.Random(0))
    m = h.incidence
    dv = np.diag(h.vertex_degrees ** -0.5)
    de = np.diag(1.0 / h.edge_degrees)
    np.testing.assert_allclose(h.theta, dv @ m @ de @ m.T @ dv, atol=1e-14)


def test_line_hyperedges_added():
    stations = [Station(s, s, 51.5, -0.1) for s in "abcd"]
    links = [Link(("a", "b"), {"Red"}), Link(("b", "c"), {"Red"}), Link(("c", "d"), {"Blue", "Red"})]
    h = build_hypergraph(build_graph(stations, links))
    assert h.hyperedges == ((0, 1), (1, 2), (2, 3), (0, 1, 2, 3))


def test_isolated_vertex_rejected():
    with pytest.raises(GraphError):
        Hypergraph(3, ((0, 1),))
    with pytest.raises(GraphError):
        Hypergraph(2, ((0, 1), ()))


@pytest.mark.parametrize("seed", range(25))
def test_operator_identities(seed):
    h = random_hypergraph(random.Random(seed))
    t = h.theta
    assert np.abs(t - t.T).max() < 1e-12
    w = np.linalg.eigvalsh(t)
    assert w.min() >= -1e-9 and w.max() <= 1 + 1e-9
    assert np.linalg.eigvalsh(h.laplacian).min() >= -1e-9
    assert np.abs(h.laplacian @ np.sqrt(h.vertex_degrees)).max() < 1e-10


def flows_from(entries, exits):
    e = np.asarray(entries, float)
    x = np.asarray(exits, float)
    return FlowTable(tuple(f"s{i}" for i in range(len(e))), e, x, x, e)


def test_features_degenerate():
    with pytest.warns(UserWarning), pytest.raises(ValueError, match="no informative features"):
        build_features(flows_from([5, 5, 5], [7, 7, 7]))


def test_features_two_stations():
    feats = build_features(flows_from([10, 30], [40, 5]))
    np.testing.assert_allclose(np.abs(feats.x), 1.0)
    assert feats.columns == ("entries_am", "exits_am", "net_linear_am", "net_log_am")


def test_features_drop_constant_column():
    with pytest.warns(UserWarning, match="entries_am"):
        feats = build_features(flows_from([10, 10, 10], [1, 5, 20]))
    assert "entries_am" in feats.dropped and feats.x.shape == (3, 3)


def test_sample_feature_moments(sample, sample_graph):
    x = build_features(sample.flows.aligned(sample_graph)).x
    np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(x.var(axis=0), 1.0, atol=1e-10)


def test_identity_model_reduces_to_features():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 1))
    layer = Layer(w=np.eye(1), alpha=0.0, activation="identity")
    out, _ = forward([layer], np.ones((5, 5)), x)
    np.testing.assert_array_equal(out, x)


def _flat_check(layers, p, x, y, idx):
    """Analytic vs central-difference gradient, relative error per parameter tensor."""
    _, grads = loss_and_grads(layers, p, x, y, idx)
    worst = 0.0
    for li, (dw, da) in enumerate(grads):
        def f_w(w, li=li):
            trial = copy.deepcopy(layers)
            trial[li].w = w
            return loss_and_grads(trial, p, x, y, idx)[0]

        def f_a(a, li=li):
            trial = copy.deepcopy(layers)
            trial[li].alpha = float(a[0, 0])
            return loss_and_grads(trial, p, x, y, idx)[0]

        num_w = fd_gradient(f_w, layers[li].w)
        num_a = fd_gradient(f_a, [[layers[li].alpha]])[0, 0]
        worst = max(worst, np.linalg.norm(dw - num_w) / max(np.linalg.norm(dw) + np.linalg.norm(num_w), 1e-12))
        worst = max(worst, abs(da - num_a) / max(abs(da) + abs(num_a), 1e-12))
    return worst


@pytest.mark.parametrize("kind", ["nn", "gnn", "hgnn"])
@pytest.mark.parametrize("layers", ["single", "double"])
def test_gradients_match_finite_differences(kind, layers, sample_graph):
    from metrograph.hypernet import KIND_TO_PROPAGATION

    p = propagation(sample_graph, KIND_TO_PROPAGATION[kind]).matrix
    rng = np.random.default_rng(1)
    x = rng.normal(size=(sample_graph.n, 4))
    y = rng.normal(size=sample_graph.n)
    idx = np.arange(0, sample_graph.n, 2)
    params = init_layers(ModelSpec(kind=kind, layers=layers), 4, Rng(3))
    assert _flat_check(params, p, x, y, idx) < 1e-4


def test_run_experiment_deterministic(sample, sample_graph):
    a = run_experiment(sample_graph, sample.flows, "hgnn", seed=7, epochs=50)
    b = run_experiment(sample_graph, sample.flows, "hgnn", seed=7, epochs=50)
    assert a.train_mse == b.train_mse and a.test_mse == b.test_mse
    assert a.predictions == b.predictions
    np.testing.assert_array_equal(a.loss_history, b.loss_history)


def test_split_is_partition(sample, sample_graph):
    rep = run_experiment(sample_graph, sample.flows, "nn", seed=3, epochs=5)
    assert not set(rep.train_ids) & set(rep.test_ids)
    assert set(rep.train_ids) | set(rep.test_ids) == set(sample_graph.ids)
    assert len(rep.train_ids) == round(0.7 * sample_graph.n)
    assert rep.train_mse >= 0 and rep.test_mse >= 0


def test_full_training_split_has_no_test_mse(sample, sample_graph):
    rep = run_experiment(sample_graph, sample.flows, "gnn", train_frac=1.0, epochs=5)
    assert rep.test_mse is None and rep.test_ids == ()


def test_targets_normalised_on_training_stations(sample, sample_graph):
    from metrograph.diffusion import net_flow

    rep = run_experiment(sample_graph, sample.flows, "nn", seed=11, epochs=0)
    y = dict(zip(sample_graph.ids, net_flow(sample.flows.aligned(sample_graph), "linear", "pm").q))
    train_y = np.array([y[s] for s in rep.train_ids])
    assert rep.target_mean == pytest.approx(train_y.mean())
    assert rep.target_std == pytest.approx(train_y.std())


@pytest.mark.parametrize("kind", ["nn", "gnn", "hgnn"])
def test_permutation_equivariance(kind):
    rng = random.Random(4)
    n = 9
    base = cycle(n)
    perm = list(range(n))
    rng.shuffle(perm)
    inv = np.argsort(perm)
    from graphgen import graph_from_edges
    from metrograph.hypernet import KIND_TO_PROPAGATION

    # vertex i of the permuted graph is vertex perm[i] of the base graph
    edges = [(int(inv[i]), int(inv[j])) for i, j in base.edge_index_pairs]
    permuted = graph_from_edges(n, edges)
    x = np.random.default_rng(0).normal(size=(n, 3))
    y = np.random.default_rng(1).normal(size=n)
    spec = ModelSpec(kind=kind)
    layers = init_layers(spec, 3, Rng(0))
    train_b = [0, 1, 2, 5, 7]
    pb = propagation(base, KIND_TO_PROPAGATION[kind])
    pp = propagation(permuted, KIND_TO_PROPAGATION[kind])
    rb = train(spec, x, y, pb, train_b, epochs=30, layers=copy.deepcopy(layers))
    rp = train(spec, x[perm], y[perm], pp, [int(inv[i]) for i in train_b], epochs=30, layers=copy.deepcopy(layers))
    pred_b = np.array([rb.predictions[str(i)] for i in range(n)])
    pred_p = np.array([rp.predictions[str(i)] for i in range(n)])
    np.testing.assert_allclose(pred_p, pred_b[perm], atol=1e-10)


@pytest.mark.parametrize("kind", ["nn", "gnn", "hgnn"])
def test_loss_non_increasing_on_sample(kind, sample, sample_graph):
    rep = run_experiment(sample_graph, sample.flows, kind, seed=42)
    steps = np.diff(rep.loss_history)
    violations = int(np.sum(steps > 1e-12))
    assert violations <= 0.01 * len(steps)
    assert rep.loss_history[-1] < rep.loss_history[0]


def test_divergence_raises(sample, sample_graph):
    with pytest.raises(NumericalError, match="smaller learning rate"):
        run_experiment(sample_graph, sample.flows, "gnn", lr=1e3, epochs=200)


def test_empty_training_set_rejected():
    prop = propagation(path(3), "identity")
    with pytest.raises(ValueError, match="empty"):
        train(ModelSpec(kind="nn"), np.ones((3, 1)), np.arange(3.0), prop, [])


def test_single_layer_flag(sample, sample_graph):
    rep = run_experiment(sample_graph, sample.flows, "hgnn", layers="single", epochs=20)
    assert len(rep.alphas) == 1
