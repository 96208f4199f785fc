"""Hypergraph operators and semi-supervised regression of evening flows.

Each model layer computes ``act((I + alpha P) H W)`` for a propagation matrix
``P``: the identity for the plain network, the binary adjacency for the graph
network and the normalised hypergraph matrix for the hypergraph network.
Gradients are derived by hand and checked against finite differences in the
test suite.

The hypergraph of a metro network has one 2-vertex hyperedge per adjacent
station pair plus one hyperedge per line holding every station on that line.
Grouping by interchange instead of by line is the other reading of "append
the multi-modal connections"; it is not implemented.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .diffusion import FlowTable, net_flow
from .graph import GraphError, MetroGraph
from .numerics import NumericalError, Rng

MODEL_KINDS = ("nn", "gnn", "hgnn")
PROPAGATION_KINDS = ("identity", "adjacency", "hypergraph")
KIND_TO_PROPAGATION = {"nn": "identity", "gnn": "adjacency", "hgnn": "hypergraph"}


# -- hypergraph -------------------------------------------------------------

@dataclass(frozen=True)
class Hypergraph:
    n_vertices: int
    hyperedges: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        edges = tuple(tuple(sorted(set(e))) for e in self.hyperedges)
        object.__setattr__(self, "hyperedges", edges)
        covered = set()
        for e in edges:
            if not e:
                raise GraphError("empty hyperedge")
            if e[0] < 0 or e[-1] >= self.n_vertices:
                raise GraphError(f"hyperedge {e} references a vertex outside 0..{self.n_vertices - 1}")
            covered.update(e)
        isolated = sorted(set(range(self.n_vertices)) - covered)
        if isolated:
            raise GraphError(f"vertices {isolated} belong to no hyperedge")

    @cached_property
    def incidence(self) -> np.ndarray:
        m = np.zeros((self.n_vertices, len(self.hyperedges)))
        for j, e in enumerate(self.hyperedges):
            m[list(e), j] = 1.0
        m.setflags(write=False)
        return m

    @property
    def vertex_degrees(self) -> np.ndarray:
        return self.incidence.sum(axis=1)

    @property
    def edge_degrees(self) -> np.ndarray:
        return self.incidence.sum(axis=0)

    @cached_property
    def theta(self) -> np.ndarray:
        """``Dv^-1/2 M De^-1 M^T Dv^-1/2``."""
        m = self.incidence
        dv = 1.0 / np.sqrt(self.vertex_degrees)
        scaled = (m * dv[:, None]) / np.sqrt(self.edge_degrees)[None, :]
        t = scaled @ scaled.T
        t = 0.5 * (t + t.T)
        t.setflags(write=False)
        return t

    @property
    def laplacian(self) -> np.ndarray:
        return np.eye(self.n_vertices) - self.theta


def build_hypergraph(g: MetroGraph) -> Hypergraph:
    """Pairwise hyperedges for every link, then one hyperedge per line; duplicates dropped."""
    if g.n == 0:
        raise GraphError("graph has no stations")
    seen = set()
    edges = []
    candidates = [tuple(sorted(p)) for p in g.edge_index_pairs] + list(g.lines.values())
    for e in candidates:
        if e not in seen:
            seen.add(e)
            edges.append(e)
    return Hypergraph(g.n, tuple(edges))


@dataclass(frozen=True)
class PropagationOperator:
    kind: str
    matrix: np.ndarray


def propagation(g: MetroGraph, kind: str, normalized_adjacency: bool = False) -> PropagationOperator:
    if kind == "identity":
        p = np.eye(g.n)
    elif kind == "adjacency":
        p = np.array(g.adjacency)
        if normalized_adjacency:
            d = p.sum(axis=1)
            inv = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-300)), 0.0)
            p = p * inv[:, None] * inv[None, :]
    elif kind == "hypergraph":
        p = np.array(build_hypergraph(g).theta)
    else:
        raise ValueError(f"propagation kind must be one of {PROPAGATION_KINDS}")
    p.setflags(write=False)
    return PropagationOperator(kind, p)


# -- features ---------------------------------------------------------------

FEATURE_NAMES = ("entries_am", "exits_am", "net_linear_am", "net_log_am")


@dataclass(frozen=True)
class FeatureMatrix:
    x: np.ndarray
    columns: tuple[str, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    dropped: tuple[str, ...] = ()


def build_features(flows: FlowTable) -> FeatureMatrix:
    """Morning entries, exits, linear and log net flow, each z-scored over stations.

    Constant columns carry no information and are dropped with a warning.
    """
    raw = np.column_stack(
        [
            flows.entries_am,
            flows.exits_am,
            net_flow(flows, "linear", "am").q,
            net_flow(flows, "log", "am").q,
        ]
    )
    cols, means, stds, dropped = [], [], [], []
    for j, name in enumerate(FEATURE_NAMES):
        mu = float(raw[:, j].mean())
        sd = float(raw[:, j].std())
        if not sd > 1e-12 * max(1.0, abs(mu)):
            dropped.append(name)
            continue
        cols.append(j)
        means.append(mu)
        stds.append(sd)
    if dropped:
        warnings.warn(f"dropping constant feature columns: {', '.join(dropped)}", stacklevel=2)
    if not cols:
        raise ValueError("no informative features: every flow feature is constant")
    x = (raw[:, cols] - np.array(means)) / np.array(stds)
    x.setflags(write=False)
    return FeatureMatrix(
        x=x,
        columns=tuple(FEATURE_NAMES[j] for j in cols),
        means=tuple(means),
        stds=tuple(stds),
        dropped=tuple(dropped),
    )


# -- model ------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """``layers="double"`` is F -> hidden (tanh) -> 1 (identity); ``"single"`` is F -> 1 (identity)."""

    kind: str = "hgnn"
    layers: str = "double"
    hidden: int = 8
    alpha_init: float = 0.5
    seed: int = 42
    normalized_adjacency: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"model kind must be one of {MODEL_KINDS}")
        if self.layers not in ("single", "double"):
            raise ValueError("layers must be 'single' or 'double'")

    def widths(self, n_features: int) -> list[int]:
        if self.layers == "single":
            return [n_features, 1]
        return [n_features, self.hidden, 1]


@dataclass
class Layer:
    w: np.ndarray
    alpha: float
    activation: str  # "tanh" | "identity"


def init_layers(spec: ModelSpec, n_features: int, rng: Rng) -> list[Layer]:
    widths = spec.widths(n_features)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        act = "identity" if i == len(widths) - 2 else "tanh"
        layers.append(Layer(rng.uniform_array((fan_in, fan_out), -bound, bound), spec.alpha_init, act))
    return layers


def forward(layers: Sequence[Layer], p: np.ndarray, x: np.ndarray):
    """Return the output and the per-layer cache needed by :func:`backward`."""
    h = x
    cache = []
    for layer in layers:
        u = h @ layer.w
        pu = p @ u
        z = u + layer.alpha * pu
        out = np.tanh(z) if layer.activation == "tanh" else z
        cache.append((h, pu, out))
        h = out
    return h, cache


def backward(layers: Sequence[Layer], p: np.ndarray, cache, d_out: np.ndarray):
    """Gradients ``[(dW, dalpha), ...]`` given the loss gradient at the output."""
    grads = []
    g = d_out
    for layer, (h, pu, out) in zip(reversed(layers), reversed(cache)):
        dz = g * (1.0 - out * out) if layer.activation == "tanh" else g
        d_alpha = float(np.sum(dz * pu))
        du = dz + layer.alpha * (p.T @ dz)
        grads.append((h.T @ du, d_alpha))
        g = du @ layer.w.T
    return grads[::-1]


def masked_mse(pred: np.ndarray, y: np.ndarray, idx: np.ndarray) -> float:
    r = pred[idx, 0] - y[idx]
    return float(np.mean(r * r))


def loss_and_grads(layers, p, x, y, train_idx):
    out, cache = forward(layers, p, x)
    loss = masked_mse(out, y, train_idx)
    d_out = np.zeros_like(out)
    d_out[train_idx, 0] = 2.0 * (out[train_idx, 0] - y[train_idx]) / len(train_idx)
    return loss, backward(layers, p, cache, d_out)


@dataclass
class TrainReport:
    kind: str
    train_mse: float
    test_mse: float | None
    epochs: int
    lr: float
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    feature_columns: tuple[str, ...]
    feature_means: tuple[float, ...]
    feature_stds: tuple[float, ...]
    target_mean: float
    target_std: float
    alphas: tuple[float, ...]
    loss_history: np.ndarray = field(repr=False)
    predictions: dict[str, float] = field(repr=False, default_factory=dict)
    predictions_normalized: dict[str, float] = field(repr=False, default_factory=dict)


def train(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    prop: PropagationOperator,
    train_idx: Sequence[int],
    epochs: int = 500,
    lr: float = 0.01,
    ids: Sequence[str] | None = None,
    rng: Rng | None = None,
    features: FeatureMatrix | None = None,
    layers: list[Layer] | None = None,
) -> TrainReport:
    """Full-batch gradient descent on the training stations' MSE.

    ``y`` is in raw units; it is z-scored with training-station moments only.
    Propagation always runs over the whole network.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    train_idx = np.array(sorted(set(int(i) for i in train_idx)), dtype=int)
    if train_idx.size == 0:
        raise ValueError("training set is empty")
    test_idx = np.array(sorted(set(range(n)) - set(train_idx.tolist())), dtype=int)
    ids = list(ids) if ids is not None else [str(i) for i in range(n)]
    if epochs < 0 or not lr > 0:
        raise ValueError("epochs must be non-negative and lr positive")

    mu = float(y[train_idx].mean())
    sd = float(y[train_idx].std())
    if not sd > 0:
        sd = 1.0
    yz = (y - mu) / sd

    if layers is None:
        layers = init_layers(spec, x.shape[1], rng if rng is not None else Rng(spec.seed))
    p = prop.matrix
    history = np.empty(epochs + 1)
    # overflow is reported through the finiteness checks below
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            loss, grads = loss_and_grads(layers, p, x, yz, train_idx)
            if not math.isfinite(loss):
                raise NumericalError(f"training diverged at epoch {epoch}; try a smaller learning rate")
            history[epoch] = loss
            for layer, (dw, da) in zip(layers, grads):
                layer.w = layer.w - lr * dw
                layer.alpha = layer.alpha - lr * da
        out, _ = forward(layers, p, x)
    final = masked_mse(out, yz, train_idx)
    if not (math.isfinite(final) and np.all(np.isfinite(out))):
        raise NumericalError("training diverged; try a smaller learning rate")
    history[epochs] = final
    history.setflags(write=False)

    pred = out[:, 0]
    return TrainReport(
        kind=spec.kind,
        train_mse=final,
        test_mse=masked_mse(out, yz, test_idx) if test_idx.size else None,
        epochs=epochs,
        lr=lr,
        train_ids=tuple(ids[i] for i in train_idx),
        test_ids=tuple(ids[i] for i in test_idx),
        feature_columns=features.columns if features else (),
        feature_means=features.means if features else (),
        feature_stds=features.stds if features else (),
        target_mean=mu,
        target_std=sd,
        alphas=tuple(float(layer.alpha) for layer in layers),
        loss_history=history,
        predictions={sid: float(v * sd + mu) for sid, v in zip(ids, pred)},
        predictions_normalized={sid: float(v) for sid, v in zip(ids, pred)},
    )


def split_stations(n: int, train_frac: float, rng: Rng) -> tuple[list[int], list[int]]:
    """Seeded shuffle split; at least one training station."""
    if not 0.0 < train_frac <= 1.0:
        raise ValueError("train_frac must lie in (0, 1]")
    perm = rng.permutation(n)
    n_train = min(n, max(1, int(round(train_frac * n))))
    return sorted(perm[:n_train]), sorted(perm[n_train:])


def run_experiment(
    g: MetroGraph,
    flows: FlowTable,
    kind: str = "hgnn",
    seed: int = 42,
    train_frac: float = 0.7,
    epochs: int = 500,
    lr: float = 0.01,
    layers: str = "double",
    normalized_adjacency: bool = False,
) -> TrainReport:
    """Predict evening linear net out-flow from morning features.

    One generator seeded with ``seed`` draws the split and then the initial
    weights, so the three model kinds share both for a given seed.
    """
    spec = ModelSpec(kind=kind, layers=layers, seed=seed, normalized_adjacency=normalized_adjacency)
    flows = flows.aligned(g)
    feats = build_features(flows)
    y = net_flow(flows, "linear", "pm").q
    prop = propagation(g, KIND_TO_PROPAGATION[kind], normalized_adjacency)
    rng = Rng(seed)
    train_idx, _ = split_stations(g.n, train_frac, rng)
    return train(spec, feats.x, y, prop, train_idx, epochs, lr, ids=g.ids, rng=rng, features=feats)
